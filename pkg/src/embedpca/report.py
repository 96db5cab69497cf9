"""CSV emitters and plain-text tables for every pipeline output."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bench import BenchReport
from .evaluation import EvalRow, Histogram, RegressionResult
from .metrics import MetricKind


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _num(c) for c in row])


def row_label(kind: MetricKind, space: str) -> str:
    return kind.label if space == "full" else f"{kind.label} - PCA"


def write_variance_curve(path, curve: Sequence[tuple[int, float]]) -> None:
    _write(path, ["component", "cumulative_ratio"], curve)


def write_ladder(path, ladder: Sequence[tuple[float, int | None]]) -> None:
    _write(path, ["threshold", "components"], ladder)


def write_pairwise(path, ids, values: Mapping[tuple[MetricKind, str], np.ndarray]) -> None:
    rows = []
    for (kind, space), vals in values.items():
        rows.extend((int(i), kind.value, space, float(v)) for i, v in zip(ids, vals))
    _write(path, ["pair_id", "metric", "space", "value"], rows)


def write_eval_report(path, rows: Sequence[EvalRow]) -> None:
    _write(
        path,
        ["metric", "space", "mae_raw", "mae_calibrated", "pearson", "spearman", "n"],
        [(r.kind.value, r.space, r.mae_raw, r.mae_calibrated, r.pearson, r.spearman, r.n) for r in rows],
    )


def write_regression(path, rows: Sequence[tuple[MetricKind, str, RegressionResult]]) -> None:
    _write(
        path,
        ["metric", "space", "intercept", "slope", "slope_se", "t_stat", "p_value", "r2", "f_stat", "n"],
        [(k.value, s, r.intercept, r.slope, r.slope_se, r.t_stat, r.p_value, r.r2, r.f_stat, r.n)
         for k, s, r in rows],
    )


def write_bench(path, reports: Sequence[BenchReport], include_timing: bool = True) -> None:
    """Benchmark rows; ``include_timing=False`` keeps only run-invariant columns."""
    if include_timing:
        header = ["metric", "space", "mean_ms", "std_ms", "speedup", "bytes", "ratio",
                  "median_ms", "per_pair_ms", "noise_band", "dim", "n_pairs", "checksum"]
        rows = [(r.kind.value, r.space, r.mean_ms, r.std_ms, r.speedup, r.payload_bytes, r.ratio,
                 r.median_ms, r.per_pair_ms, r.noise_band, r.dim, r.n_pairs, r.checksum)
                for r in reports]
    else:
        header = ["metric", "space", "bytes", "ratio", "dim", "n_pairs", "checksum"]
        rows = [(r.kind.value, r.space, r.payload_bytes, r.ratio, r.dim, r.n_pairs, r.checksum)
                for r in reports]
    _write(path, header, rows)


def write_histograms(path, hists: Mapping[str, Histogram]) -> None:
    rows = []
    for name, h in hists.items():
        for i, c in enumerate(h.counts):
            rows.append((name, i, float(h.edges[i]), float(h.edges[i + 1]), int(c)))
    _write(path, ["series", "bin", "lo", "hi", "count"], rows)


def write_qq(path, series: Mapping[str, np.ndarray]) -> None:
    rows = []
    for name, pts in series.items():
        rows.extend((name, i, float(a), float(b)) for i, (a, b) in enumerate(pts))
    _write(path, ["series", "order", "rank_x", "rank_y"], rows)


def write_correlation(path, names: Sequence[str], matrix: np.ndarray) -> None:
    _write(path, ["column", *names], [(n, *map(float, row)) for n, row in zip(names, matrix)])


def format_table(header: Sequence[str], rows: Sequence[Sequence], floatfmt: str = ".4f") -> str:
    cells = [[c if isinstance(c, str) else ("" if c is None else format(c, floatfmt)
                                            if isinstance(c, float) else str(c)) for c in row]
             for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(header)]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    lines = [rule, "  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths))), rule]
    for r in cells:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
    lines.append(rule)
    return "\n".join(lines)


def bench_table(reports: Sequence[BenchReport]) -> str:
    rows = [(row_label(r.kind, r.space), r.per_pair_ms, r.median_ms, r.speedup, r.ratio) for r in reports]
    return format_table(["Metric", "ms/pair", "batch median ms", "speedup", "storage ratio"], rows)


def eval_table(rows: Sequence[EvalRow]) -> str:
    return format_table(
        ["Metric", "MAE raw", "MAE calibrated", "Pearson", "Spearman", "n"],
        [(row_label(r.kind, r.space), r.mae_raw, r.mae_calibrated, r.pearson, r.spearman, r.n) for r in rows],
    )


def regression_table(rows: Sequence[tuple[MetricKind, str, RegressionResult]]) -> str:
    return format_table(
        ["Predictor", "Intercept", "Slope", "t-stat", "p-value", "R^2", "F-stat"],
        [(row_label(k, s), r.intercept, r.slope, r.t_stat, f"{r.p_value:.3g}", r.r2, r.f_stat)
         for k, s, r in rows],
    )
