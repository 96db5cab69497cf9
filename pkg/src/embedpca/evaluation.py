"""Agreement statistics between metric values and human scores.

Covers MAE, Pearson and Spearman correlation, simple OLS with slope
inference, histograms and rank pairs for QQ plots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, UndefinedMetricError
from .metrics import MetricKind


def _vec(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"{name} must be 1-D")
    if not np.isfinite(x).all():
        raise DataError(f"{name} contains non-finite values")
    return x


def _pair(x, y, min_n=1):
    x, y = _vec(x, "x"), _vec(y, "y")
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < min_n:
        raise DataError(f"need at least {min_n} values, got {x.shape[0]}")
    return x, y


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def is_constant(x: np.ndarray) -> bool:
    """True when the spread of ``x`` is within a few ulps of its magnitude."""
    spread = float(np.ptp(x))
    return spread <= 8 * np.finfo(np.float64).eps * float(np.max(np.abs(x)))


def pearson(x, y) -> float:
    x, y = _pair(x, y, min_n=2)
    if is_constant(x) or is_constant(y):
        raise UndefinedMetricError("correlation undefined for a constant input")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def average_ranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    x = _vec(x)
    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_x[1:] != sorted_x[:-1]])
    ends = np.r_[starts[1:], len(x)]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(x))
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def spearman(x, y) -> float:
    x, y = _pair(x, y, min_n=2)
    return pearson(average_ranks(x), average_ranks(y))


# --- Student t tail -------------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 10_000, eps: float = 1e-16) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise DataError("df must be positive")
    if math.isnan(t):
        raise DataError("t is NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if t == 0.0:
        return 0.5
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    x = df / (df + t * t)
    tail = 0.5 * betainc_regularized(df / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail


def two_sided_p(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


# --- regression -----------------------------------------------------------

@dataclass(frozen=True)
class RegressionResult:
    intercept: float
    slope: float
    slope_se: float
    t_stat: float
    p_value: float
    r2: float
    f_stat: float
    n: int

    def predict(self, x) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=np.float64)


def ols_simple(x, y) -> RegressionResult:
    """Least-squares fit of ``y = b0 + b1 * x`` with a two-sided slope t-test.

    Degenerate cases: constant ``y`` gives slope 0, r2 0, t 0 and p 1; a
    perfect non-flat fit gives an infinite t and p 0.
    """
    x, y = _pair(x, y, min_n=3)
    n = x.shape[0]
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0.0 or is_constant(x):
        raise UndefinedMetricError("regression undefined for a constant predictor")
    sxy = float(dx @ dy)
    sst = float(dy @ dy)
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    sse = float(resid @ resid)
    slope_se = math.sqrt(sse / (n - 2) / sxx)
    if slope_se > 0:
        t = slope / slope_se
    elif slope == 0:
        t = 0.0
    else:
        t = math.copysign(math.inf, slope)
    r2 = 0.0 if sst == 0 else min(1.0, max(0.0, 1.0 - sse / sst))
    return RegressionResult(
        intercept=intercept,
        slope=slope,
        slope_se=slope_se,
        t_stat=t,
        p_value=two_sided_p(t, n - 2),
        r2=r2,
        f_stat=t * t,
        n=n,
    )


def calibrated_predictions(metric_values, fit: RegressionResult) -> np.ndarray:
    return fit.predict(_vec(metric_values))


# --- reports --------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    kind: MetricKind
    space: str
    mae_raw: float
    mae_calibrated: float
    pearson: float
    spearman: float
    n: int


def evaluate_metric(kind: MetricKind, space: str, train_values, train_scores,
                    test_values, test_scores) -> EvalRow:
    """One report row: raw and train-calibrated MAE plus test correlations."""
    test_values, test_scores = _pair(test_values, test_scores, min_n=2)
    fit = ols_simple(train_values, train_scores)
    return EvalRow(
        kind=kind,
        space=space,
        mae_raw=mae(test_values, test_scores),
        mae_calibrated=mae(calibrated_predictions(test_values, fit), test_scores),
        pearson=pearson(test_values, test_scores),
        spearman=spearman(test_values, test_scores),
        n=int(test_values.shape[0]),
    )


def correlation_matrix(columns: Mapping[str, Sequence[float]], mode: str = "raw"):
    """Pairwise Pearson (``raw``) or Spearman (``ranked``) correlations.

    Returns ``(names, matrix)``.
    """
    if mode not in ("raw", "ranked"):
        raise DataError(f"mode must be 'raw' or 'ranked', got {mode!r}")
    names = list(columns)
    cols = [_vec(columns[n], n) for n in names]
    if len({c.shape[0] for c in cols}) > 1:
        raise DataError("columns differ in length")
    if mode == "ranked":
        cols = [average_ranks(c) for c in cols]
    for name, c in zip(names, cols):
        if c.shape[0] < 2 or is_constant(c):
            raise UndefinedMetricError(f"column {name!r} is constant")
    m = len(cols)
    mat = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            mat[i, j] = mat[j, i] = pearson(cols[i], cols[j])
    return names, mat


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def histogram(values, bins: int = 50, range: tuple[float, float] | None = None) -> Histogram:
    """Equal-width histogram.

    Values equal to the upper edge land in the last bin. With an explicit
    ``range``, values outside it are clamped into the first or last bin so
    every value is counted exactly once.
    """
    values = _vec(values, "values")
    if values.shape[0] < 1:
        raise DataError("histogram of an empty vector")
    if bins < 1:
        raise DataError("bins must be >= 1")
    if range is None:
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = map(float, range)
        if not lo < hi:
            raise DataError(f"empty histogram range [{lo}, {hi}]")
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.int64)
    return Histogram(edges, counts)


def qq_ranks(x, y) -> np.ndarray:
    """Sorted average ranks of ``x`` and ``y`` paired by order statistic, shape (n, 2)."""
    x, y = _pair(x, y)
    return np.column_stack([np.sort(average_ranks(x)), np.sort(average_ranks(y))])
