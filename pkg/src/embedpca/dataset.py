"""Scored sentence-pair datasets: loading, score normalization, splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

REQUIRED_FIELDS = ("sentence1", "sentence2", "score")


@dataclass(frozen=True)
class SentencePair:
    id: int
    sentence1: str
    sentence2: str
    score: float

    def __post_init__(self):
        if not self.sentence1 or not self.sentence2:
            raise DataError(f"pair {self.id}: empty sentence")
        if not math.isfinite(self.score):
            raise DataError(f"pair {self.id}: non-finite score")


@dataclass(frozen=True)
class PairDataset:
    pairs: tuple[SentencePair, ...]
    source_scale: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate pair ids")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def ids(self) -> np.ndarray:
        return np.array([p.id for p in self.pairs], dtype=np.uint64)

    @property
    def scores(self) -> np.ndarray:
        return np.array([p.score for p in self.pairs], dtype=np.float64)

    def sentences(self, which: int) -> list[str]:
        attr = "sentence1" if which == 1 else "sentence2"
        return [getattr(p, attr) for p in self.pairs]


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    train_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def _records_csv(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        names = [h.strip().lower() for h in header]
        missing = [f for f in REQUIRED_FIELDS if f not in names]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise DataError(f"{path}: row {lineno}: expected {len(names)} fields, got {len(row)}")
            yield lineno, dict(zip(names, row))


def _records_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: row {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}: row {lineno}: expected an object")
            yield lineno, {str(k).lower(): v for k, v in obj.items()}


def load_pairs(
    path: str | Path,
    format: str | None = None,
    source_scale: tuple[float, float] = (0.0, 1.0),
) -> PairDataset:
    """Read a CSV or JSONL file of ``sentence1, sentence2, score[, id]`` records.

    Header names are case-insensitive. Rows without an ``id`` get their
    0-based record position. Scores outside ``source_scale`` are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    fmt = (format or _detect_format(path)).lower()
    if fmt not in ("csv", "jsonl"):
        raise DataError(f"unsupported format {format!r}")
    lo, hi = map(float, source_scale)
    records = _records_csv(path) if fmt == "csv" else _records_jsonl(path)

    pairs = []
    for position, (lineno, rec) in enumerate(records):
        missing = [f for f in REQUIRED_FIELDS if rec.get(f) in (None, "")]
        if missing:
            raise DataError(f"{path}: row {lineno}: missing {', '.join(missing)}")
        try:
            score = float(rec["score"])
            raw_id = rec.get("id")
            pid = position if raw_id in (None, "") else int(raw_id)
        except (TypeError, ValueError):
            raise DataError(f"{path}: row {lineno}: unparsable score or id") from None
        if not lo <= score <= hi:
            raise DataError(f"{path}: row {lineno}: score {score} outside [{lo}, {hi}]")
        s1, s2 = str(rec["sentence1"]).strip(), str(rec["sentence2"]).strip()
        if not s1 or not s2:
            raise DataError(f"{path}: row {lineno}: empty sentence")
        pairs.append(SentencePair(pid, s1, s2, score))

    if not pairs:
        raise DataError(f"{path}: no records")
    return PairDataset(tuple(pairs), (lo, hi))


def normalize_scores(ds: PairDataset) -> PairDataset:
    """Map scores affinely from ``ds.source_scale`` onto [0, 1]."""
    lo, hi = ds.source_scale
    if hi == lo:
        raise DataError(f"degenerate score scale [{lo}, {hi}]")
    if (lo, hi) == (0.0, 1.0):
        return ds
    span = hi - lo
    pairs = tuple(replace(p, score=(p.score - lo) / span) for p in ds.pairs)
    return PairDataset(pairs, (0.0, 1.0))


def split(ds: PairDataset, spec: SplitSpec = SplitSpec()) -> tuple[PairDataset, PairDataset]:
    """Random pair-level train/test split.

    The permutation comes from numpy's PCG64 generator seeded with
    ``spec.seed``; each partition keeps the original file order. The train
    size is ``round(train_fraction * N)`` with halves rounded up.
    """
    n = len(ds)
    if n < 2:
        raise DataError("need at least 2 pairs to split")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise DataError(f"train_fraction {spec.train_fraction} leaves an empty partition for N={n}")
    perm = np.random.Generator(np.random.PCG64(spec.seed)).permutation(n)
    in_train = np.zeros(n, dtype=bool)
    in_train[perm[:n_train]] = True
    train = tuple(p for p, t in zip(ds.pairs, in_train) if t)
    test = tuple(p for p, t in zip(ds.pairs, in_train) if not t)
    return PairDataset(train, ds.source_scale), PairDataset(test, ds.source_scale)


def write_pairs(ds: PairDataset, path: str | Path) -> None:
    """Write ``id,sentence1,sentence2,score`` CSV (scores as shortest repr)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "sentence1", "sentence2", "score"])
        for p in ds.pairs:
            w.writerow([p.id, p.sentence1, p.sentence2, repr(p.score)])


def subset(ds: PairDataset, ids: Sequence[int]) -> PairDataset:
    wanted = set(int(i) for i in ids)
    return PairDataset(tuple(p for p in ds.pairs if p.id in wanted), ds.source_scale)
