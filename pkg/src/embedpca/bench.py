"""Kernel timing in full vs PCA space and index memory accounting."""

from __future__ import annotations

import hashlib
import statistics
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .metrics import METRIC_ORDER, MetricKind, batch_metric
from .store import INDEX_HEADER_BYTES, TRAILER_BYTES, SCALAR_KINDS, VectorIndex

MIN_NOISE_BAND = 0.25


@dataclass(frozen=True)
class BenchConfig:
    warmup_iters: int = 3
    measured_iters: int = 30
    pair_count: int = 10_000
    dims_full: int = 3072
    dims_pca: int = 110
    seed: int = 0
    scalar: str = "f32"

    def __post_init__(self):
        if self.measured_iters < 1:
            raise DataError("measured_iters must be >= 1")
        if self.warmup_iters < 0:
            raise DataError("warmup_iters must be >= 0")
        if self.pair_count < 1:
            raise DataError("pair_count must be >= 1")
        if not 1 <= self.dims_pca <= self.dims_full:
            raise DataError("need 1 <= dims_pca <= dims_full")
        if self.scalar not in ("f32", "f64"):
            raise DataError("scalar must be 'f32' or 'f64'")


@dataclass(frozen=True)
class IndexMemory:
    header_bytes: int
    id_bytes: int
    payload_bytes: int
    trailer_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.header_bytes + self.id_bytes + self.payload_bytes + self.trailer_bytes


def memory_for(rows: int, dim: int, scalar: str = "f32") -> IndexMemory:
    width = 4 if scalar == "f32" else 8
    return IndexMemory(INDEX_HEADER_BYTES, rows * 8, rows * dim * width, TRAILER_BYTES)


def index_memory(index: VectorIndex) -> IndexMemory:
    """Exact on-disk size of ``index``, split into header, ids, payload and trailer."""
    return IndexMemory(
        INDEX_HEADER_BYTES,
        index.ids.nbytes,
        index.rows * index.dim * SCALAR_KINDS[index.scalar_kind].itemsize,
        TRAILER_BYTES,
    )


def checksum(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


@dataclass(frozen=True)
class BenchReport:
    kind: MetricKind
    space: str
    n_pairs: int
    dim: int
    mean_ms: float
    std_ms: float
    median_ms: float
    checksum: str
    payload_bytes: int
    noise_band: float = MIN_NOISE_BAND
    speedup: float | None = None
    ratio: float | None = None

    @property
    def per_pair_ms(self) -> float:
        return self.mean_ms / self.n_pairs

    @property
    def cv(self) -> float:
        return self.std_ms / self.mean_ms if self.mean_ms > 0 else 0.0


def time_metric(kind: MetricKind, E1, E2, cfg: BenchConfig = BenchConfig(), space: str = "full") -> BenchReport:
    """Time full batch passes of one kernel over row-aligned ``E1``/``E2``.

    Warmup passes are discarded. The result of the first pass is hashed so
    callers can confirm the benchmark computed the same values as
    :func:`embedpca.metrics.pairwise_metric`.
    """
    E1, E2 = np.asarray(E1), np.asarray(E2)
    if E1.size == 0 or E2.size == 0:
        raise DataError("cannot benchmark empty matrices")
    if E1.shape != E2.shape or E1.ndim != 2:
        raise DataError(f"matrices must be row-aligned 2-D arrays, got {E1.shape} and {E2.shape}")

    digest = checksum(batch_metric(kind, E1, E2))
    for _ in range(cfg.warmup_iters):
        batch_metric(kind, E1, E2)
    samples = []
    for _ in range(cfg.measured_iters):
        t0 = time.perf_counter_ns()
        batch_metric(kind, E1, E2)
        samples.append((time.perf_counter_ns() - t0) / 1e6)
    std = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return BenchReport(
        kind=kind,
        space=space,
        n_pairs=E1.shape[0],
        dim=E1.shape[1],
        mean_ms=statistics.fmean(samples),
        std_ms=std,
        median_ms=statistics.median(samples),
        checksum=digest,
        payload_bytes=E1.nbytes + E2.nbytes,
    )


def synthetic_pairs(n: int, dim: int, seed: int, scalar: str = "f32"):
    rng = np.random.Generator(np.random.PCG64(seed))
    dtype = np.float32 if scalar == "f32" else np.float64
    E1 = rng.standard_normal((n, dim), dtype=np.float64).astype(dtype)
    E2 = rng.standard_normal((n, dim), dtype=np.float64).astype(dtype)
    return E1, E2


def compare(full: BenchReport, reduced: BenchReport) -> BenchReport:
    """Attach speedup (ratio of medians), storage ratio and noise band to ``reduced``."""
    band = max(MIN_NOISE_BAND, 3.0 * (full.cv + reduced.cv))
    return replace(
        reduced,
        speedup=full.median_ms / reduced.median_ms if reduced.median_ms > 0 else float("inf"),
        ratio=full.payload_bytes / reduced.payload_bytes,
        noise_band=band,
    )


def bench_suite(cfg: BenchConfig = BenchConfig(), full=None, reduced=None) -> list[BenchReport]:
    """All four metrics in both spaces, in the order full x4 then PCA x4.

    ``full`` and ``reduced`` are optional ``(E1, E2)`` pairs of real
    embeddings; otherwise seeded standard-normal matrices of the configured
    sizes are drawn.
    """
    if full is None:
        full = synthetic_pairs(cfg.pair_count, cfg.dims_full, cfg.seed, cfg.scalar)
    if reduced is None:
        reduced = synthetic_pairs(cfg.pair_count, cfg.dims_pca, cfg.seed + 1, cfg.scalar)

    full_rows = [time_metric(kind, *full, cfg, "full") for kind in METRIC_ORDER]
    full_rows = [replace(r, speedup=1.0, ratio=1.0) for r in full_rows]
    pca_rows = [compare(f, time_metric(f.kind, *reduced, cfg, "pca"))
                for f in full_rows]
    return full_rows + pca_rows
