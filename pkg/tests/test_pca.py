import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from embedpca.errors import DataError
from embedpca.pca import (
    PcaModel,
    fit_pca,
    fit_standardizer,
    inverse_transform,
    reconstruction_error,
    select_components,
    standardize,
    threshold_ladder,
    transform,
    variance_curve,
)

FIXED_6x3 = np.array([
    [2.5, 2.4, 0.5],
    [0.5, 0.7, 1.9],
    [2.2, 2.9, -0.3],
    [1.9, 2.2, 0.8],
    [3.1, 3.0, 0.1],
    [2.3, 2.7, 1.2],
])


def cov_eig_oracle(X):
    """Descending eigenpairs of the N-1 sample covariance by dense eigh."""
    Xc = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(Xc.T @ Xc / (X.shape[0] - 1))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order].T


def test_constant_column_flagged():
    X = np.array([[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]])
    s = fit_standardizer(X)
    assert s.zero_variance.tolist() == [False, True]
    assert s.scale[1] == 1.0
    np.testing.assert_array_equal(standardize(s, X)[:, 1], 0.0)


def test_sample_std_uses_n_minus_one():
    s = fit_standardizer(np.array([[-1.0], [1.0]]))
    assert s.mean[0] == 0.0
    assert s.scale[0] == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_standardizer_idempotent():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(50, 4))
    Z = standardize(fit_standardizer(X), X)
    s2 = fit_standardizer(Z)
    np.testing.assert_allclose(s2.mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(s2.scale, 1.0, atol=1e-12)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(Z.std(axis=0, ddof=1), 1.0, atol=1e-10)


def test_standardize_hand_table():
    X = np.array([[1.0, 2.0], [3.0, 6.0], [5.0, 10.0]])
    # column means (3, 6), sample stds (2, 4)
    expected = np.array([[-1.0, -1.0], [0.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(standardize(fit_standardizer(X), X), expected, atol=1e-15)


def test_standardize_mean_rows_and_errors():
    X = np.array([[1.0, 2.0], [3.0, 6.0]])
    s = fit_standardizer(X)
    np.testing.assert_array_equal(standardize(s, np.tile(s.mean, (4, 1))), 0.0)
    with pytest.raises(DataError, match="columns"):
        standardize(s, np.zeros((2, 3)))
    with pytest.raises(DataError, match="2 rows"):
        fit_standardizer(np.zeros((1, 3)))


def test_rank_one_data():
    direction = np.array([1.0, -2.0, 0.5])
    X = np.outer(np.arange(1.0, 8.0), direction)
    model = fit_pca(X)
    assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(model.explained_variance[1:], 0.0, atol=1e-12)
    one = fit_pca(X, 1)
    assert select_components(one, 1.0) == 1
    assert variance_curve(one) == [(1, pytest.approx(1.0, abs=1e-12))]
    # axis sign fixed so the largest-magnitude entry (-2) becomes positive
    np.testing.assert_allclose(one.components[0], -direction / np.linalg.norm(direction), atol=1e-12)


def test_fixed_matrix_matches_eig_oracle():
    vals, vecs = cov_eig_oracle(FIXED_6x3)
    model = fit_pca(FIXED_6x3)
    np.testing.assert_allclose(model.explained_variance, vals, atol=1e-8)
    # same axes up to sign
    np.testing.assert_allclose(np.abs(model.components @ vecs.T), np.eye(3), atol=1e-8)
    assert model.total_variance == pytest.approx(np.trace(np.cov(FIXED_6x3.T)), rel=1e-12)


def test_isotropic_ratios_monte_carlo():
    rng = np.random.default_rng(20240)
    X = rng.standard_normal((40_000, 5))
    ratios = fit_pca(X).explained_variance_ratio
    np.testing.assert_allclose(ratios, 0.2, atol=0.01)


def test_max_components_bounds():
    X = np.random.default_rng(1).standard_normal((4, 6))
    assert fit_pca(X).k == 3
    assert fit_pca(X, 0).k == 0
    with pytest.raises(DataError, match="outside"):
        fit_pca(X, 4)
    with pytest.raises(DataError, match="2 rows"):
        fit_pca(X[:1])


def test_select_components_unreachable():
    X = np.random.default_rng(2).standard_normal((30, 6))
    model = fit_pca(X, 2)
    with pytest.raises(DataError, match="unreachable"):
        select_components(model, 0.999)
    with pytest.raises(DataError):
        select_components(model, 0.0)


def test_threshold_ladder_increasing():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((200, 40)) * np.linspace(5, 0.1, 40)
    ladder = threshold_ladder(fit_pca(X))
    ks = [k for _, k in ladder]
    assert ks == sorted(ks) and len(set(ks)) == len(ks)


def test_transform_centering_and_isometry():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((12, 4))
    model = fit_pca(X)
    assert model.k == 4
    np.testing.assert_allclose(transform(model, model.train_mean[None, :]), 0.0, atol=1e-15)
    Y = transform(model, X)
    Xc = X - X.mean(axis=0)
    np.testing.assert_allclose(np.linalg.norm(Y, axis=1), np.linalg.norm(Xc, axis=1), atol=1e-8)


def test_projection_matches_oracle_4x3():
    X = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 1.0], [4.0, 0.0, 3.0], [0.0, 3.0, 2.0]])
    _, vecs = cov_eig_oracle(X)
    expected = (X - X.mean(axis=0)) @ vecs[:2].T
    got = transform(fit_pca(X, 2), X)
    np.testing.assert_allclose(np.abs(got), np.abs(expected), atol=1e-10)
    # per-axis sign agreement
    signs = np.sign(np.sum(got * expected, axis=0))
    np.testing.assert_allclose(got, expected * signs, atol=1e-10)


def test_inverse_transform_cases():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((8, 3)) @ rng.standard_normal((3, 5))  # rank 3
    model = fit_pca(X, 3)
    np.testing.assert_allclose(inverse_transform(model, transform(model, X)), X, atol=1e-8)
    zero = model.truncate(0)
    Xhat = inverse_transform(zero, transform(zero, X))
    np.testing.assert_allclose(Xhat, np.tile(model.train_mean, (8, 1)), atol=1e-15)
    with pytest.raises(DataError):
        inverse_transform(model, np.zeros((2, 4)))
    with pytest.raises(DataError):
        transform(model, np.zeros((2, 4)))


def test_reconstruction_error_equals_discarded_spectrum():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((25, 7)) * np.arange(1, 8)
    full = fit_pca(X)
    for k in range(full.k + 1):
        model = full.truncate(k)
        resid = X - inverse_transform(model, transform(model, X))
        brute = np.mean(np.sum(resid**2, axis=1))
        predicted = full.explained_variance[k:].sum() * (25 - 1) / 25
        assert reconstruction_error(model, X) == pytest.approx(brute, rel=1e-12)
        assert brute == pytest.approx(predicted, rel=1e-6, abs=1e-12)


def test_sign_canonical_and_deterministic():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((30, 6))
    a, b = fit_pca(X), fit_pca(X.copy())
    np.testing.assert_array_equal(a.components, b.components)
    pivots = a.components[np.arange(a.k), np.argmax(np.abs(a.components), axis=1)]
    assert (pivots > 0).all()


def test_from_parts_rejects_bad_models():
    good = fit_pca(FIXED_6x3)
    kwargs = dict(explained_variance=good.explained_variance, total_variance=good.total_variance,
                  train_mean=good.train_mean, n_samples=6)
    with pytest.raises(DataError, match="orthonormal"):
        PcaModel.from_parts(components=good.components * 1.01, **kwargs)
    with pytest.raises(DataError, match="non-increasing"):
        PcaModel.from_parts(components=good.components,
                            **{**kwargs, "explained_variance": good.explained_variance[::-1]})


matrices = st.integers(2, 20).flatmap(
    lambda n: st.integers(1, 20).flatmap(
        lambda d: arrays(np.float64, (n, d), elements=st.floats(-100, 100, allow_subnormal=False))
    )
)


@settings(max_examples=80, deadline=None)
@given(X=matrices)
def test_spectrum_properties(X):
    model = fit_pca(X)
    k = model.k
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(k), atol=1e-8)
    ev = model.explained_variance
    assert (ev >= 0).all() and (np.diff(ev) <= 0).all()
    cum = model.cumulative_ratio
    if k:
        assert (np.diff(cum) >= -1e-15).all()
        assert cum[-1] <= 1 + 1e-12
    vals, _ = cov_eig_oracle(X)
    np.testing.assert_allclose(ev, vals[:k], atol=1e-8 * max(1.0, vals[0]))
