"""End-to-end experiment: split, fit PCA, score both spaces, evaluate, benchmark.

Full-space and PCA-space evaluations run through the same functions; only
the vectors differ.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bench import BenchConfig, bench_suite, index_memory
from .dataset import PairDataset, SplitSpec, load_pairs, normalize_scores, split
from .embed import EmbeddingCache, HashingProvider, HttpProvider, ProviderConfig, embed_texts, read_vectors
from .errors import DataError
from .evaluation import (
    correlation_matrix,
    evaluate_metric,
    histogram,
    ols_simple,
    qq_ranks,
)
from .metrics import METRIC_ORDER, SPACES, MetricKind, pairwise_metric
from .pca import fit_pca, fit_standardizer, project, select_components, standardize, threshold_ladder, variance_curve
from . import report
from .store import VectorIndex, save_index, save_model

log = logging.getLogger(__name__)

DEFAULT_K = 110
REFERENCE_STORAGE_RATIO = 28.6
TIMING_OUTPUTS = ("bench.csv",)


@dataclass
class RunConfig:
    pairs: str
    out_dir: str
    format: str | None = None
    scale: tuple[float, float] = (0.0, 1.0)
    emb1: str | None = None
    emb2: str | None = None
    provider: str = "hashing"
    provider_config: ProviderConfig = field(default_factory=ProviderConfig)
    hashing_dim: int = 256
    cache: str | None = None
    k: int | None = DEFAULT_K
    threshold: float | None = None
    seed: int = 0
    train_fraction: float = 0.5
    regress_on: str = "test"
    bins: int = 50
    scalar: str = "f32"
    bench: bool = True
    bench_warmup: int = 3
    bench_iters: int = 30

    def __post_init__(self):
        if self.threshold is not None:
            self.k = None
        if (self.k is None) == (self.threshold is None):
            raise DataError("exactly one of k and threshold must be set")
        if self.regress_on not in ("train", "test", "all"):
            raise DataError("regress_on must be train, test or all")
        if (self.emb1 is None) != (self.emb2 is None):
            raise DataError("give both emb1 and emb2, or neither")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def aligned_vectors(path: str | Path, ids: np.ndarray) -> np.ndarray:
    """Rows of the vector file at ``path`` reordered to match pair ``ids``."""
    index = read_vectors(path)
    pos = {int(i): r for r, i in enumerate(index.ids)}
    try:
        rows = [pos[int(i)] for i in ids]
    except KeyError as exc:
        raise DataError(f"{path}: no vector for pair id {exc.args[0]}") from None
    return np.asarray(index.vectors[rows], dtype=np.float64)


def make_provider(name: str, cfg: ProviderConfig, hashing_dim: int = 256):
    if name == "hashing":
        return HashingProvider(hashing_dim)
    if name == "http":
        return HttpProvider(cfg)
    raise DataError(f"unknown provider {name!r}")


def embed_dataset(ds: PairDataset, provider, cache=None, batch_size=64, max_workers=1):
    cache = cache if isinstance(cache, EmbeddingCache) else EmbeddingCache(cache)
    E1 = embed_texts(ds.sentences(1), provider, cache, batch_size, max_workers)
    E2 = embed_texts(ds.sentences(2), provider, cache, batch_size, max_workers)
    return E1, E2


def fit_model(train_vectors: np.ndarray, k: int | None = DEFAULT_K, threshold: float | None = None):
    """Standardize, fit every available component, then keep ``k`` of them.

    Returns ``(model, full_model)``; the full model drives the variance
    curve and threshold ladder.
    """
    std = fit_standardizer(train_vectors)
    full = fit_pca(standardize(std, train_vectors), "all").with_standardizer(std)
    if threshold is not None:
        k = select_components(full, threshold)
    if k is None or not 0 < k <= full.k:
        raise DataError(f"k={k} outside [1, {full.k}] for {train_vectors.shape[0]} training rows")
    return full.truncate(k), full


def score_spaces(spaces: dict[str, tuple[np.ndarray, np.ndarray]]):
    return {
        (kind, space): pairwise_metric(E1, E2, kind)
        for space, (E1, E2) in spaces.items()
        for kind in METRIC_ORDER
    }


def run_pipeline(cfg: RunConfig) -> dict:
    """Run the whole experiment and write every artifact to ``cfg.out_dir``.

    Returns the manifest dictionary that is also written as ``manifest.json``.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ds = normalize_scores(load_pairs(cfg.pairs, cfg.format, cfg.scale))
    train, test = split(ds, SplitSpec(cfg.seed, cfg.train_fraction))
    is_train = np.isin(ds.ids, train.ids)
    log.info("%d pairs: %d train / %d test", len(ds), len(train), len(test))

    inputs = {"pairs": sha256_file(cfg.pairs)}
    if cfg.emb1 is not None:
        E1, E2 = aligned_vectors(cfg.emb1, ds.ids), aligned_vectors(cfg.emb2, ds.ids)
        inputs["emb1"], inputs["emb2"] = sha256_file(cfg.emb1), sha256_file(cfg.emb2)
    else:
        provider = make_provider(cfg.provider, cfg.provider_config, cfg.hashing_dim)
        E1, E2 = embed_dataset(ds, provider, cfg.cache, cfg.provider_config.batch_size,
                               cfg.provider_config.max_workers)
    if E1.shape[1] != E2.shape[1]:
        raise DataError(f"embedding dimensions differ: {E1.shape[1]} vs {E2.shape[1]}")

    model, full_model = fit_model(np.vstack([E1[is_train], E2[is_train]]), cfg.k, cfg.threshold)
    save_model(model, out / "model.pcam")
    report.write_variance_curve(out / "variance_curve.csv", variance_curve(full_model))
    report.write_ladder(out / "variance_ladder.csv", threshold_ladder(full_model))

    P1, P2 = project(model, E1), project(model, E2)
    spaces = {"full": (E1, E2), "pca": (P1, P2)}

    # both sentences of every pair, id = 2 * pair_id + side
    sent_ids = np.concatenate([ds.ids * 2, ds.ids * 2 + 1]).astype(np.uint64)
    memory = {}
    for space, (A, B) in spaces.items():
        idx = VectorIndex.from_matrix(np.vstack([A, B]), sent_ids, cfg.scalar)
        save_index(idx, out / f"index_{space}.vidx")
        memory[space] = (idx, index_memory(idx))
    mf, mp = memory["full"][1], memory["pca"][1]
    report._write(
        out / "memory.csv",
        ["space", "rows", "dim", "scalar", "header_bytes", "id_bytes", "payload_bytes",
         "trailer_bytes", "total_bytes", "payload_ratio", "total_ratio", "reference_ratio"],
        [(space, idx.rows, idx.dim, idx.scalar_name, m.header_bytes, m.id_bytes, m.payload_bytes,
          m.trailer_bytes, m.total_bytes, mf.payload_bytes / m.payload_bytes,
          mf.total_bytes / m.total_bytes, REFERENCE_STORAGE_RATIO)
         for space, (idx, m) in memory.items()],
    )

    values = score_spaces(spaces)
    report.write_pairwise(out / "pairwise.csv", ds.ids, values)

    scores = ds.scores
    te = ~is_train
    eval_rows = [
        evaluate_metric(kind, space, v[is_train], scores[is_train], v[te], scores[te])
        for (kind, space), v in values.items()
    ]
    report.write_eval_report(out / "eval_report.csv", eval_rows)

    sel = {"train": is_train, "test": te, "all": np.ones_like(te)}[cfg.regress_on]
    regressions = [(kind, space, ols_simple(v[sel], scores[sel])) for (kind, space), v in values.items()]
    report.write_regression(out / "regression.csv", regressions)

    hists = {}
    for (kind, space), v in values.items():
        hists[f"raw:{kind.value}:{space}"] = histogram(v[te], cfg.bins)
    for (kind, space), v in values.items():
        hists[f"abs_error:{kind.value}:{space}"] = histogram(np.abs(scores[te] - v[te]), cfg.bins)
    report.write_histograms(out / "histograms.csv", hists)

    qq = {f"{kind.value}:{space}": qq_ranks(values[kind, space][te], scores[te])
          for kind in (MetricKind.COSINE_SIMILARITY, MetricKind.L1_NORM) for space in SPACES}
    report.write_qq(out / "qq.csv", qq)

    columns = {f"{kind.value}:{space}": v[te] for (kind, space), v in values.items()}
    columns["score"] = scores[te]
    for mode in ("raw", "ranked"):
        names, mat = correlation_matrix(columns, mode)
        report.write_correlation(out / f"correlation_{mode}.csv", names, mat)

    outputs = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    if cfg.bench:
        bcfg = BenchConfig(cfg.bench_warmup, cfg.bench_iters, int(te.sum()), E1.shape[1], model.k,
                           cfg.seed, cfg.scalar)
        dtype = np.float32 if cfg.scalar == "f32" else np.float64
        reports = bench_suite(
            bcfg,
            full=(E1[te].astype(dtype), E2[te].astype(dtype)),
            reduced=(P1[te].astype(dtype), P2[te].astype(dtype)),
        )
        report.write_bench(out / "bench.csv", reports)
        report.write_bench(out / "bench_checksums.csv", reports, include_timing=False)
        outputs += ["bench.csv", "bench_checksums.csv"]
        print(report.bench_table(reports))

    print(report.eval_table(eval_rows))
    print(report.regression_table(regressions))

    config = asdict(cfg)
    config["out_dir"] = "."
    manifest = {
        "package": "embedpca",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "root_seed": cfg.seed,
        "config": config,
        "inputs": inputs,
        "counts": {"pairs": len(ds), "train": len(train), "test": len(test)},
        "pca": {"d": model.d, "k": model.k, "cumulative_ratio": float(model.cumulative_ratio[-1])},
        "timing_outputs": list(TIMING_OUTPUTS) if cfg.bench else [],
        "outputs": {
            name: sha256_file(out / name) for name in sorted(outputs) if name not in TIMING_OUTPUTS
        },
    }
    with (out / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest
