import numpy as np
import pytest

from embedpca.bench import (
    BenchConfig,
    bench_suite,
    checksum,
    index_memory,
    memory_for,
    synthetic_pairs,
    time_metric,
)
from embedpca.errors import DataError
from embedpca.metrics import METRIC_ORDER, MetricKind, pairwise_metric
from embedpca.store import VectorIndex


def test_memory_single_scalar():
    m = index_memory(VectorIndex.from_matrix(np.ones((1, 1)), scalar="f32"))
    assert m.payload_bytes == 4
    assert m.header_bytes == 23 and m.id_bytes == 8 and m.trailer_bytes == 4
    assert m.total_bytes == len(VectorIndex.from_matrix(np.ones((1, 1))).to_bytes())


def test_memory_at_full_scale():
    full, pca = memory_for(17_200, 3072), memory_for(17_200, 110)
    assert full.payload_bytes == 211_353_600
    assert full.payload_bytes / pca.payload_bytes == 3072 / 110
    assert round(3072 / 110, 2) == 27.93


def test_time_metric_checksum_matches_metrics_module():
    E1, E2 = synthetic_pairs(200, 32, seed=5)
    cfg = BenchConfig(warmup_iters=1, measured_iters=3)
    for kind in METRIC_ORDER:
        rep = time_metric(kind, E1, E2, cfg)
        assert rep.checksum == checksum(pairwise_metric(E1, E2, kind))
        assert rep.mean_ms > 0 and rep.n_pairs == 200 and rep.dim == 32


def test_checksums_deterministic_across_runs():
    cfg = BenchConfig(warmup_iters=0, measured_iters=1, pair_count=100, dims_full=64, dims_pca=8, seed=3)
    a, b = bench_suite(cfg), bench_suite(cfg)
    assert [r.checksum for r in a] == [r.checksum for r in b]
    assert [(r.kind, r.space) for r in a] == [(k, "full") for k in METRIC_ORDER] + [(k, "pca") for k in METRIC_ORDER]
    assert len(a) == 8
    for r in a[4:]:
        assert r.ratio == 64 / 8


def test_errors():
    with pytest.raises(DataError):
        time_metric(MetricKind.L1_NORM, np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(DataError):
        BenchConfig(measured_iters=0)
    with pytest.raises(DataError):
        BenchConfig(dims_full=10, dims_pca=20)


def test_equal_dims_speedup_within_noise_band():
    cfg = BenchConfig(warmup_iters=2, measured_iters=15, pair_count=2000, dims_full=256, dims_pca=256)
    for r in bench_suite(cfg)[4:]:
        assert abs(r.speedup - 1.0) <= r.noise_band, r


def test_time_decreases_with_k():
    cfg = BenchConfig(warmup_iters=2, measured_iters=9, pair_count=4000)
    for kind in (MetricKind.COSINE_SIMILARITY, MetricKind.L1_NORM):
        reports = [time_metric(kind, *synthetic_pairs(4000, k, seed=k), cfg) for k in (64, 110, 256, 1024)]
        for small, large in zip(reports, reports[1:]):
            band = max(0.25, 3 * (small.cv + large.cv))
            assert small.median_ms <= large.median_ms * (1 + band), (kind, small.dim, large.dim)
