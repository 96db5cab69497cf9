"""Standardization and exact PCA via thin SVD.

Sample statistics use the N-1 denominator throughout, both for the
standardizer scale and for the component spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

ORTHONORMAL_TOL = 1e-8


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError(f"{name} contains non-finite values")
    return X


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray
    zero_variance: np.ndarray

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def fit_standardizer(X) -> Standardizer:
    """Column means and sample standard deviations of ``X``.

    Constant columns are flagged in ``zero_variance`` and get scale 1, so
    they are only centered.
    """
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise DataError("need at least 2 rows to fit a standardizer")
    mean = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1)
    zero = scale == 0.0
    scale = np.where(zero, 1.0, scale)
    return Standardizer(mean, scale, zero)


def standardize(s: Standardizer, X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[1] != s.d:
        raise DataError(f"expected {s.d} columns, got {X.shape[1]}")
    return (X - s.mean) / s.scale


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted principal axes.

    ``components`` holds one unit-norm axis per row, ordered by decreasing
    ``explained_variance``. ``total_variance`` is the trace of the sample
    covariance of the fitting data, so ratios stay meaningful after the
    model is truncated.
    """

    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float
    train_mean: np.ndarray
    n_samples: int
    standardizer: Standardizer | None = None

    @classmethod
    def from_parts(cls, *, components, explained_variance, total_variance, train_mean,
                   n_samples, standardizer=None) -> "PcaModel":
        """Build a model from raw arrays, validating every invariant."""
        components = np.asarray(components, dtype=np.float64)
        ev = np.asarray(explained_variance, dtype=np.float64)
        train_mean = np.asarray(train_mean, dtype=np.float64)
        if components.ndim != 2 or components.shape[0] != ev.shape[0]:
            raise DataError("components and explained_variance disagree in k")
        if train_mean.shape != (components.shape[1],):
            raise DataError("train_mean length does not match component width")
        for name, arr in (("components", components), ("explained_variance", ev),
                          ("train_mean", train_mean)):
            if not np.isfinite(arr).all():
                raise DataError(f"{name} contains non-finite values")
        if not np.isfinite(total_variance) or total_variance < 0:
            raise DataError("total_variance must be finite and non-negative")
        if (ev < 0).any():
            raise DataError("explained_variance has negative entries")
        if (np.diff(ev) > 0).any():
            raise DataError("explained_variance is not non-increasing")
        k = components.shape[0]
        gram = components @ components.T
        if k and np.abs(gram - np.eye(k)).max() > ORTHONORMAL_TOL:
            raise DataError("component rows are not orthonormal")
        if ev.sum() > total_variance * (1 + 1e-12) + 1e-300:
            raise DataError("explained variance exceeds total variance")
        if standardizer is not None:
            if standardizer.d != components.shape[1]:
                raise DataError("standardizer width does not match model")
            if not (np.isfinite(standardizer.mean).all() and np.isfinite(standardizer.scale).all()
                    and (standardizer.scale > 0).all()):
                raise DataError("standardizer scale must be finite and positive")
        return cls(components, ev, float(total_variance), train_mean, int(n_samples), standardizer)

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance

    @property
    def cumulative_ratio(self) -> np.ndarray:
        return np.cumsum(self.explained_variance_ratio)

    def truncate(self, k: int) -> "PcaModel":
        if not 0 <= k <= self.k:
            raise DataError(f"cannot keep {k} of {self.k} components")
        return PcaModel(self.components[:k], self.explained_variance[:k], self.total_variance,
                        self.train_mean, self.n_samples, self.standardizer)

    def with_standardizer(self, standardizer: Standardizer) -> "PcaModel":
        return PcaModel(self.components, self.explained_variance, self.total_variance,
                        self.train_mean, self.n_samples, standardizer)


def _canonical_signs(vt: np.ndarray) -> np.ndarray:
    if vt.size == 0:
        return vt
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def fit_pca(Xstd, max_components: int | str = "all") -> PcaModel:
    """Fit principal axes of ``Xstd`` by thin SVD of the centered matrix.

    ``max_components`` may be an integer in ``[0, min(N-1, d)]`` or
    ``"all"`` for the upper bound. Each axis is sign-flipped so that its
    largest-magnitude entry is positive, which makes fits reproducible.
    """
    X = _as_matrix(Xstd, "Xstd")
    n, d = X.shape
    if n < 2:
        raise DataError("need at least 2 rows to fit PCA")
    limit = min(n - 1, d)
    if max_components in (None, "all"):
        k = limit
    else:
        k = int(max_components)
        if not 0 <= k <= limit:
            raise DataError(f"max_components={max_components} outside [0, {limit}]")

    train_mean = X.mean(axis=0)
    centered = X - train_mean
    try:
        _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DataError(f"SVD did not converge: {exc}") from None
    spectrum = sv**2 / (n - 1)
    total = float(np.sum(centered * centered) / (n - 1))
    return PcaModel.from_parts(
        components=_canonical_signs(vt[:k]),
        explained_variance=spectrum[:k],
        total_variance=total,
        train_mean=train_mean,
        n_samples=n,
    )


def select_components(model: PcaModel, threshold: float) -> int:
    """Smallest k whose cumulative explained-variance ratio reaches ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise DataError(f"threshold must lie in (0, 1], got {threshold}")
    cum = model.cumulative_ratio
    # float round-off in the cumulative sum can leave a full spectrum at 1 - 1e-16
    hits = np.flatnonzero(cum >= threshold - 1e-12)
    if hits.size == 0:
        reached = cum[-1] if cum.size else 0.0
        raise DataError(
            f"threshold {threshold} unreachable: {model.k} components explain {reached:.6f}"
        )
    return int(hits[0]) + 1


def transform(model: PcaModel, Xstd) -> np.ndarray:
    X = _as_matrix(Xstd, "Xstd")
    if X.shape[1] != model.d:
        raise DataError(f"expected {model.d} columns, got {X.shape[1]}")
    return (X - model.train_mean) @ model.components.T


def inverse_transform(model: PcaModel, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != model.k:
        raise DataError(f"expected {model.k} columns, got shape {Y.shape}")
    return Y @ model.components + model.train_mean


def reconstruction_error(model: PcaModel, Xstd) -> float:
    """Mean over rows of the squared Euclidean residual after projection.

    On the fitting data this equals ``sum(discarded eigenvalues) * (N-1)/N``.
    """
    X = _as_matrix(Xstd, "Xstd")
    resid = X - inverse_transform(model, transform(model, X))
    return float(np.mean(np.sum(resid * resid, axis=1)))


def variance_curve(model: PcaModel) -> list[tuple[int, float]]:
    return [(i + 1, float(c)) for i, c in enumerate(model.cumulative_ratio)]


def threshold_ladder(model: PcaModel, thresholds=(0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)):
    """(threshold, k) rows; unreachable thresholds map to None."""
    out = []
    for t in thresholds:
        try:
            out.append((t, select_components(model, t)))
        except DataError:
            out.append((t, None))
    return out


def project(model: PcaModel, X) -> np.ndarray:
    """Standardize raw vectors with the model's standardizer, then transform."""
    if model.standardizer is not None:
        X = standardize(model.standardizer, X)
    return transform(model, X)
