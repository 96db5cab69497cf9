"""Distance and similarity kernels plus exact top-k retrieval.

Every kernel works on row-aligned 2-D arrays and accumulates in float64
regardless of storage precision. The scalar functions run the same kernel
on a single row, so scalar and batch results agree bit for bit.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import DataError, UndefinedMetricError


class MetricKind(enum.Enum):
    COSINE_SIMILARITY = "cosine_similarity"
    L1_SIMILARITY = "l1_similarity"
    L1_NORM = "l1_norm"
    L2_NORM = "l2_norm"

    @property
    def is_similarity(self) -> bool:
        return self in (MetricKind.COSINE_SIMILARITY, MetricKind.L1_SIMILARITY)

    @property
    def label(self) -> str:
        return {
            MetricKind.COSINE_SIMILARITY: "Cosine Similarity",
            MetricKind.L1_SIMILARITY: "L1 Similarity",
            MetricKind.L1_NORM: "L1 Norm",
            MetricKind.L2_NORM: "L2 Norm",
        }[self]

    @classmethod
    def parse(cls, name: str) -> "MetricKind":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"cosine": "cosine_similarity", "l1sim": "l1_similarity", "l1": "l1_norm",
                   "l2": "l2_norm"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise DataError(f"unknown metric {name!r}") from None


# row order used for every report
METRIC_ORDER = (
    MetricKind.COSINE_SIMILARITY,
    MetricKind.L1_SIMILARITY,
    MetricKind.L1_NORM,
    MetricKind.L2_NORM,
)
SPACES = ("full", "pca")


def _rows(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def l1_norm_rows(a, b) -> np.ndarray:
    return np.abs(_rows(a) - _rows(b)).sum(axis=-1)


def l2_norm_rows(a, b) -> np.ndarray:
    diff = _rows(a) - _rows(b)
    return np.sqrt((diff * diff).sum(axis=-1))


def _check_nonzero(norm_a, norm_b, what):
    if (norm_a == 0).any() or (norm_b == 0).any():
        bad = np.flatnonzero((norm_a == 0) | (norm_b == 0))
        raise UndefinedMetricError(f"{what} undefined for zero vector (row {int(bad[0])})")


def l1_similarity_rows(a, b) -> np.ndarray:
    a, b = _rows(a), _rows(b)
    sa, sb = np.abs(a).sum(axis=-1), np.abs(b).sum(axis=-1)
    _check_nonzero(np.atleast_1d(sa), np.atleast_1d(sb), "L1 similarity")
    return (a * b).sum(axis=-1) / (sa * sb)


def cosine_similarity_rows(a, b) -> np.ndarray:
    a, b = _rows(a), _rows(b)
    na, nb = np.sqrt((a * a).sum(axis=-1)), np.sqrt((b * b).sum(axis=-1))
    _check_nonzero(np.atleast_1d(na), np.atleast_1d(nb), "cosine similarity")
    return np.clip((a * b).sum(axis=-1) / (na * nb), -1.0, 1.0)


KERNELS = {
    MetricKind.COSINE_SIMILARITY: cosine_similarity_rows,
    MetricKind.L1_SIMILARITY: l1_similarity_rows,
    MetricKind.L1_NORM: l1_norm_rows,
    MetricKind.L2_NORM: l2_norm_rows,
}


def _check_vectors(u, v):
    u, v = np.asarray(u), np.asarray(v)
    if u.ndim != 1 or v.ndim != 1:
        raise DataError("expected 1-D vectors")
    if u.shape != v.shape:
        raise DataError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise DataError("non-finite input")
    return u[None, :], v[None, :]


def l1_norm(u, v) -> float:
    """Manhattan distance."""
    return float(l1_norm_rows(*_check_vectors(u, v))[0])


def l2_norm(u, v) -> float:
    """Euclidean distance."""
    return float(l2_norm_rows(*_check_vectors(u, v))[0])


def l1_similarity(u, v) -> float:
    """Dot product over the product of the two L1 norms."""
    return float(l1_similarity_rows(*_check_vectors(u, v))[0])


def cosine_similarity(u, v) -> float:
    return float(cosine_similarity_rows(*_check_vectors(u, v))[0])


def metric(kind: MetricKind, u, v) -> float:
    return float(KERNELS[kind](*_check_vectors(u, v))[0])


def batch_metric(kind: MetricKind, E1, E2) -> np.ndarray:
    """Unchecked row-wise kernel; the benchmark times exactly this call."""
    return KERNELS[kind](E1, E2)


def pairwise_metric(E1, E2, kind: MetricKind, ds=None) -> np.ndarray:
    """``kind`` evaluated on each aligned row pair of ``E1`` and ``E2``.

    If a dataset is given its length must match the row count.
    """
    E1, E2 = np.asarray(E1), np.asarray(E2)
    if E1.ndim != 2 or E2.ndim != 2:
        raise DataError("embedding matrices must be 2-D")
    if E1.shape[0] != E2.shape[0]:
        raise DataError(f"row-count mismatch: {E1.shape[0]} vs {E2.shape[0]}")
    if ds is not None and len(ds) != E1.shape[0]:
        raise DataError(f"dataset has {len(ds)} pairs but matrices have {E1.shape[0]} rows")
    if E1.shape[1] != E2.shape[1]:
        raise DataError(f"dimension mismatch: {E1.shape[1]} vs {E2.shape[1]}")
    if not (np.isfinite(E1).all() and np.isfinite(E2).all()):
        raise DataError("non-finite input")
    return batch_metric(kind, E1, E2)


def top_k(query, index, kind: MetricKind, k: int) -> list[tuple[int, float]]:
    """Exact brute-force ranking of ``index`` rows against ``query``.

    Similarities rank descending, distances ascending; ties go to the lower id.
    """
    vectors, ids = index.vectors, index.ids
    if vectors.shape[0] == 0:
        raise DataError("empty index")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (vectors.shape[1],):
        raise DataError(f"query dim {query.shape} does not match index dim {vectors.shape[1]}")
    if not 1 <= k <= vectors.shape[0]:
        raise DataError(f"k={k} outside [1, {vectors.shape[0]}]")
    if not np.isfinite(query).all():
        raise DataError("non-finite query")
    q = np.broadcast_to(query, vectors.shape)
    values = KERNELS[kind](q, vectors)
    key = -values if kind.is_similarity else values
    order = np.lexsort((ids, key))[:k]
    return [(int(ids[i]), float(values[i])) for i in order]
