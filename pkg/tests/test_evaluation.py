import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from embedpca.errors import DataError, UndefinedMetricError
from embedpca.evaluation import (
    average_ranks,
    betainc_regularized,
    calibrated_predictions,
    correlation_matrix,
    evaluate_metric,
    histogram,
    mae,
    ols_simple,
    pearson,
    qq_ranks,
    spearman,
    student_t_sf,
    RegressionResult,
)
from embedpca.metrics import MetricKind

# tail probabilities from mpmath quadrature of the t density (40 digits)
T_SF_QUADRATURE = [
    (2, math.sqrt(2.0), 0.1464466094067262377995778189475754803576),
    (5, 2.5, 0.02724504967118812055775637958030632022379),
    (30, -1.2, 0.880234824555168793901104207360674610156),
    (100, 3.3, 0.000670309760980047586382431850594677103216),
    (7, 0.3, 0.3864450252010671411838912111598941873422),
]


def test_mae():
    assert mae([0.2, 0.4], [0.2, 0.4]) == 0.0
    assert mae([0.0, 1.0], [1.0, 0.0]) == 1.0
    x = np.linspace(0, 1, 11)
    assert mae(x + 0.25, x) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(DataError, match="mismatch"):
        mae([1.0], [1.0, 2.0])


def test_pearson_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-15)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-15)
    assert pearson(x, [1.0, 3.0, 2.0, 4.0]) == pytest.approx(0.8, abs=1e-15)
    with pytest.raises(UndefinedMetricError):
        pearson(x, [2.0, 2.0, 2.0, 2.0])


def test_spearman_examples():
    x = np.array([0.1, 0.5, 2.0, 3.0, 9.0])
    assert spearman(x, np.exp(x)) == 1.0
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)
    np.testing.assert_array_equal(average_ranks([1, 1, 2]), [1.5, 1.5, 3.0])


def rank_oracle(x):
    """O(n^2) average ranks: count of smaller values plus half the ties."""
    x = np.asarray(x)
    return np.array([np.sum(x < v) + (np.sum(x == v) + 1) / 2 for v in x])


def test_rank_oracle_on_tie_heavy_scores():
    rng = np.random.default_rng(0)
    levels = np.round(np.linspace(0, 1, 90), 4)
    scores = rng.choice(levels, size=4300)
    np.testing.assert_array_equal(average_ranks(scores), rank_oracle(scores))
    values = rng.standard_normal(4300)
    pts = qq_ranks(values, scores)
    np.testing.assert_array_equal(pts[:, 1], np.sort(rank_oracle(scores)))
    np.testing.assert_array_equal(pts[:, 0], np.arange(1, 4301))


def test_qq_diagonals():
    x = np.array([3.0, 1.0, 2.0, 5.0])
    pts = qq_ranks(x, x)
    np.testing.assert_array_equal(pts[:, 0], pts[:, 1])
    dec = qq_ranks(x, -x)
    np.testing.assert_array_equal(dec[:, 0], np.sort(rank_oracle(x)))
    ranks_x, ranks_negx = rank_oracle(x), rank_oracle(-x)
    np.testing.assert_array_equal(ranks_x + ranks_negx, 5.0)
    with pytest.raises(DataError):
        qq_ranks([1.0, 2.0], [1.0])


def test_ols_hand_example():
    r = ols_simple([1, 2, 3, 4], [1, 3, 2, 4])
    assert r.slope == pytest.approx(0.8, abs=1e-12)
    assert r.intercept == pytest.approx(0.5, abs=1e-12)
    assert r.r2 == pytest.approx(0.64, abs=1e-12)
    assert r.slope_se == pytest.approx(math.sqrt(0.18), abs=1e-12)
    assert r.t_stat == pytest.approx(1.885618083164126731735584965612930771426, abs=1e-12)
    assert r.f_stat == pytest.approx(32 / 9, abs=1e-12)
    # quadrature oracle: two-sided p at 2 df is exactly 0.2 here
    assert r.p_value == pytest.approx(0.2, abs=1e-12)
    assert r.n == 4


def test_ols_degenerate():
    perfect = ols_simple([0, 1, 2], [0, 1, 2])
    assert (perfect.intercept, perfect.slope, perfect.r2) == (0.0, 1.0, 1.0)
    assert perfect.p_value == 0.0
    flat = ols_simple([0, 1, 2, 3], [0.7, 0.7, 0.7, 0.7])
    assert flat.slope == 0.0 and flat.r2 == 0.0
    with pytest.raises(UndefinedMetricError):
        ols_simple([1, 1, 1], [1, 2, 3])
    with pytest.raises(DataError):
        ols_simple([1, 2], [1, 2])


def test_student_t_sf_values():
    assert student_t_sf(0.0, 5) == 0.5
    assert student_t_sf(1.0, 1) == pytest.approx(0.25, abs=1e-14)  # Cauchy: 1/2 - atan(1)/pi
    for df, t, expected in T_SF_QUADRATURE:
        assert student_t_sf(t, df) == pytest.approx(expected, rel=1e-12, abs=1e-15)
    assert student_t_sf(math.inf, 3) == 0.0
    assert student_t_sf(-math.inf, 3) == 1.0
    assert 0.0 <= student_t_sf(115.39, 4298) < 1e-300


def test_student_t_sf_against_scipy():
    from scipy import stats

    rng = np.random.default_rng(1)
    for _ in range(200):
        df = int(rng.integers(1, 5000))
        t = float(rng.normal(0, 4))
        assert student_t_sf(t, df) == pytest.approx(stats.t.sf(t, df), rel=1e-9, abs=1e-300)


def test_betainc_edges():
    assert betainc_regularized(2.0, 3.0, 0.0) == 0.0
    assert betainc_regularized(2.0, 3.0, 1.0) == 1.0
    # I_x(1, 1) = x
    assert betainc_regularized(1.0, 1.0, 0.3) == pytest.approx(0.3, abs=1e-15)


def test_calibrated_predictions():
    v = np.array([0.1, 0.5, 0.9])
    ident = RegressionResult(0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 3)
    np.testing.assert_array_equal(calibrated_predictions(v, ident), v)
    y = np.array([0.2, 0.9, 0.4])
    flat = RegressionResult(float(y.mean()), 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 3)
    assert mae(calibrated_predictions(v, flat), y) == pytest.approx(np.mean(np.abs(y - y.mean())))


def test_calibration_beats_raw_for_distances():
    rng = np.random.default_rng(12345)
    n = 2000
    cos = rng.uniform(0, 1, n)
    score = np.clip(0.9 * cos + rng.normal(0, 0.05, n), 0, 1)
    # a distance monotone-decreasing in cosine, on a different scale
    dist = 40.0 * (1.0 - cos) + rng.normal(0, 0.5, n)
    tr, te = slice(0, n // 2), slice(n // 2, n)
    row = evaluate_metric(MetricKind.L2_NORM, "full", dist[tr], score[tr], dist[te], score[te])
    assert row.mae_calibrated < row.mae_raw
    assert row.n == n // 2
    assert row.pearson < 0 and row.spearman < 0


def test_correlation_matrix():
    a = np.array([1.0, 2.0, 4.0, 3.0])
    b = np.array([2.0, 1.0, 0.0, 5.0])
    names, m = correlation_matrix({"a": a, "a2": a.copy(), "neg": -a}, "raw")
    assert names == ["a", "a2", "neg"]
    assert m[0, 1] == pytest.approx(1.0) and m[0, 2] == pytest.approx(-1.0)
    _, m = correlation_matrix({"a": a, "b": b, "c": a * b}, "raw")
    assert m[0, 1] == pearson(a, b) and m[1, 2] == pearson(b, a * b)
    np.testing.assert_array_equal(np.diag(m), 1.0)
    np.testing.assert_array_equal(m, m.T)
    _, r = correlation_matrix({"a": a, "b": b}, "ranked")
    assert r[0, 1] == spearman(a, b)
    with pytest.raises(UndefinedMetricError):
        correlation_matrix({"a": a, "k": np.ones(4)})


def test_histogram():
    h = histogram([0.3], bins=1)
    assert h.counts.tolist() == [1]
    h = histogram(np.arange(10.0), bins=10, range=(0, 10))
    assert h.counts.tolist() == [1] * 10
    h = histogram([0.0, 0.5, 1.0], bins=2, range=(0, 1))
    assert h.counts.tolist() == [1, 2]
    with pytest.raises(DataError):
        histogram([1.0], bins=2, range=(1, 1))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e6, 1e6)),
       st.integers(1, 40), st.booleans())
def test_histogram_conserves_count(values, bins, explicit):
    h = histogram(values, bins, range=(-10.0, 10.0) if explicit else None)
    assert h.n == values.shape[0]


stat_vectors = st.integers(3, 60).flatmap(
    lambda n: st.tuples(*[arrays(np.float64, n, elements=st.floats(-100, 100).map(lambda v: round(v, 4)))] * 2)
)


@settings(max_examples=150, deadline=None)
@given(stat_vectors)
def test_statistics_identities(xy):
    x, y = xy
    assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
    r = ols_simple(x, y)
    p = pearson(x, y)
    assert r.r2 == pytest.approx(p * p, abs=1e-10)
    if math.isfinite(r.t_stat):
        assert r.f_stat == pytest.approx(r.t_stat**2, rel=1e-8, abs=1e-8)
    assert 0.0 <= r.p_value <= 1.0
    resid = y - r.predict(x)
    assert resid @ resid <= np.sum((y - y.mean()) ** 2) + 1e-10
    assert spearman(np.exp(x / 50), y) == spearman(x, y)
    assert spearman(x, y**3) == spearman(x, y)
    assert pearson(3.0 * x + 7.0, y) == pytest.approx(p, abs=1e-12)
