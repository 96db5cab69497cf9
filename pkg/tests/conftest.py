import csv

import numpy as np
import pytest

VOCAB = [f"w{i}" for i in range(300)]


def make_sts_rows(n, seed=0, words=8):
    """Synthetic pairs whose 0-5 score is the number of shared words, rescaled."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        base = list(rng.choice(VOCAB, size=words, replace=False))
        keep = int(rng.integers(0, words + 1))
        other = list(base[:keep]) + list(rng.choice(VOCAB, size=words - keep))
        rows.append((i, " ".join(base), " ".join(other), round(5.0 * keep / words, 3)))
    return rows


def write_csv(path, rows, with_id=True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "sentence1", "sentence2", "score"] if with_id else ["sentence1", "sentence2", "score"])
        for r in rows:
            w.writerow(r if with_id else r[1:])
    return path


@pytest.fixture
def sts_csv(tmp_path):
    return write_csv(tmp_path / "sts.csv", make_sts_rows(300, seed=1))


_acceptance_lines = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _acceptance_lines.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
