"""``embedpca`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, report
from .bench import BenchConfig, bench_suite, index_memory
from .dataset import SplitSpec, load_pairs, normalize_scores, split, write_pairs
from .embed import ProviderConfig, read_vectors
from .errors import DataError, EmbedPcaError, ProviderError
from .metrics import MetricKind, top_k
from .pca import project, threshold_ladder, variance_curve
from .pipeline import (
    DEFAULT_K,
    RunConfig,
    aligned_vectors,
    embed_dataset,
    evaluate_metric,
    fit_model,
    make_provider,
    run_pipeline,
)
from .store import VectorIndex, describe, load_model, save_index, save_model

log = logging.getLogger("embedpca")

EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _scale(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    return lo, hi


def _add_selection(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--k", type=int, default=None, help=f"components to keep (default {DEFAULT_K})")
    g.add_argument("--threshold", type=float, default=None,
                   help="keep the fewest components reaching this cumulative variance ratio")


def _add_dataset(p):
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--scale", type=_scale, default=(0.0, 1.0), metavar="LO,HI",
                   help="declared score range of the source file (default 0,1)")


def _add_provider(p):
    p.add_argument("--provider", choices=("hashing", "http"), default="hashing")
    p.add_argument("--endpoint", default=ProviderConfig.endpoint)
    p.add_argument("--model-name", default=ProviderConfig.model_name)
    p.add_argument("--api-key-env", default=ProviderConfig.api_key_env)
    p.add_argument("--batch-size", type=int, default=ProviderConfig.batch_size)
    p.add_argument("--max-retries", type=int, default=ProviderConfig.max_retries)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--hashing-dim", type=int, default=256)
    p.add_argument("--cache", default=None, help="embedding cache file")


def _provider_config(a) -> ProviderConfig:
    return ProviderConfig(endpoint=a.endpoint, model_name=a.model_name, api_key_env=a.api_key_env,
                          batch_size=a.batch_size, max_retries=a.max_retries, max_workers=a.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embedpca", description="PCA compression of sentence embeddings: fit, score, evaluate, benchmark.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate, normalize and split a pair file")
    p.add_argument("input")
    _add_dataset(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("embed", help="embed both sentences of every pair")
    p.add_argument("pairs")
    _add_dataset(p)
    _add_provider(p)
    p.add_argument("--scalar", choices=("f32", "f64"), default="f64")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("fit", help="fit standardizer + PCA on vector files")
    p.add_argument("vectors", nargs="+")
    _add_selection(p)
    p.add_argument("--out", required=True, help="model file (.pcam)")
    p.add_argument("--curve", help="write component,cumulative_ratio CSV")
    p.add_argument("--ladder", help="write threshold,components CSV")

    p = sub.add_parser("transform", help="project vectors with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scalar", choices=("f32", "f64"), default="f32")

    p = sub.add_parser("index", help="build a vector index and account its memory; optionally search it")
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="write the index here")
    p.add_argument("--model", help="project through this PCA model first")
    p.add_argument("--scalar", choices=("f32", "f64"), default="f32")
    p.add_argument("--query-row", type=int, help="use this row of the index as the query")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--metric", default="cosine_similarity")

    p = sub.add_parser("eval", help="score pairs in full and PCA space and evaluate")
    p.add_argument("--pairs", required=True)
    _add_dataset(p)
    p.add_argument("--emb1", required=True)
    p.add_argument("--emb2", required=True)
    p.add_argument("--model", help="PCA model; adds the pca space")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--out", help="write the evaluation CSV here")

    p = sub.add_parser("bench", help="time the four kernels in full and reduced dimension")
    p.add_argument("--dims", type=int, default=3072)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scalar", choices=("f32", "f64"), default="f32")
    p.add_argument("--out", help="write the benchmark CSV here")

    p = sub.add_parser("describe", help="print the decoded header of a .vidx or .pcam file")
    p.add_argument("path")

    p = sub.add_parser("pipeline", help="run the full experiment")
    p.add_argument("--pairs", required=True)
    _add_dataset(p)
    p.add_argument("--emb1")
    p.add_argument("--emb2")
    _add_provider(p)
    _add_selection(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--regress-on", choices=("train", "test", "all"), default="test")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--scalar", choices=("f32", "f64"), default="f32")
    p.add_argument("--no-bench", action="store_true")
    p.add_argument("--bench-warmup", type=int, default=3)
    p.add_argument("--bench-iters", type=int, default=30)
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_ingest(a) -> int:
    ds = normalize_scores(load_pairs(a.input, a.format, a.scale))
    train, test = split(ds, SplitSpec(a.seed, a.train_fraction))
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_pairs(ds, out / "pairs.csv")
    write_pairs(train, out / "train.csv")
    write_pairs(test, out / "test.csv")
    print(f"{len(ds)} pairs -> {len(train)} train / {len(test)} test in {out}")
    return 0


def cmd_embed(a) -> int:
    ds = normalize_scores(load_pairs(a.pairs, a.format, a.scale))
    provider = make_provider(a.provider, _provider_config(a), a.hashing_dim)
    E1, E2 = embed_dataset(ds, provider, a.cache, a.batch_size, a.workers)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, E in (("sentence1", E1), ("sentence2", E2)):
        save_index(VectorIndex.from_matrix(E, ds.ids, a.scalar), out / f"{name}.vidx")
    print(f"embedded {len(ds)} pairs with {provider.model_name} (dim {E1.shape[1]}) into {out}")
    return 0


def cmd_fit(a) -> int:
    X = np.vstack([read_vectors(p).vectors.astype(np.float64) for p in a.vectors])
    k = a.k if a.k is not None or a.threshold is not None else DEFAULT_K
    model, full = fit_model(X, k, a.threshold)
    save_model(model, a.out)
    if a.curve:
        report.write_variance_curve(a.curve, variance_curve(full))
    if a.ladder:
        report.write_ladder(a.ladder, threshold_ladder(full))
    print(report.format_table(["Variance threshold", "Components"],
                              [(f"{t:.0%}", "-" if k_ is None else str(k_)) for t, k_ in threshold_ladder(full)]))
    print(f"kept k={model.k} of d={model.d} (cumulative ratio {model.cumulative_ratio[-1]:.4f}) -> {a.out}")
    return 0


def cmd_transform(a) -> int:
    model = load_model(a.model)
    idx = read_vectors(a.input)
    Y = project(model, idx.vectors)
    save_index(VectorIndex.from_matrix(Y, idx.ids, a.scalar), a.out)
    print(f"{idx.rows} x {idx.dim} -> {Y.shape[0]} x {Y.shape[1]} in {a.out}")
    return 0


def cmd_index(a) -> int:
    src = read_vectors(a.input)
    vectors = src.vectors if a.model is None else project(load_model(a.model), src.vectors)
    idx = VectorIndex.from_matrix(vectors, src.ids, a.scalar)
    if a.out:
        save_index(idx, a.out)
    m = index_memory(idx)
    print(json.dumps({"rows": idx.rows, "dim": idx.dim, "scalar": idx.scalar_name,
                      "header_bytes": m.header_bytes, "id_bytes": m.id_bytes,
                      "payload_bytes": m.payload_bytes, "trailer_bytes": m.trailer_bytes,
                      "total_bytes": m.total_bytes}, indent=2))
    if a.query_row is not None:
        if not 0 <= a.query_row < idx.rows:
            raise DataError(f"query row {a.query_row} outside [0, {idx.rows})")
        kind = MetricKind.parse(a.metric)
        for rid, value in top_k(idx.vectors[a.query_row], idx, kind, min(a.top_k, idx.rows)):
            print(f"{rid}\t{value!r}")
    return 0


def cmd_eval(a) -> int:
    from .pipeline import score_spaces

    ds = normalize_scores(load_pairs(a.pairs, a.format, a.scale))
    train, _ = split(ds, SplitSpec(a.seed, a.train_fraction))
    is_train = np.isin(ds.ids, train.ids)
    E1, E2 = aligned_vectors(a.emb1, ds.ids), aligned_vectors(a.emb2, ds.ids)
    spaces = {"full": (E1, E2)}
    if a.model:
        model = load_model(a.model)
        spaces["pca"] = (project(model, E1), project(model, E2))
    values = score_spaces(spaces)
    s, te = ds.scores, ~is_train
    rows = [evaluate_metric(kind, space, v[is_train], s[is_train], v[te], s[te])
            for (kind, space), v in values.items()]
    if a.out:
        report.write_eval_report(a.out, rows)
    print(report.eval_table(rows))
    return 0


def cmd_bench(a) -> int:
    cfg = BenchConfig(a.warmup, a.iters, a.pairs, a.dims, a.k, a.seed, a.scalar)
    reports = bench_suite(cfg)
    if a.out:
        report.write_bench(a.out, reports)
    print(report.bench_table(reports))
    return 0


def cmd_describe(a) -> int:
    print(json.dumps(describe(a.path), indent=2))
    return 0


def cmd_pipeline(a) -> int:
    cfg = RunConfig(
        pairs=a.pairs, out_dir=a.out_dir, format=a.format, scale=a.scale, emb1=a.emb1, emb2=a.emb2,
        provider=a.provider, provider_config=_provider_config(a), hashing_dim=a.hashing_dim,
        cache=a.cache, k=a.k if a.k is not None else DEFAULT_K, threshold=a.threshold, seed=a.seed,
        train_fraction=a.train_fraction, regress_on=a.regress_on, bins=a.bins, scalar=a.scalar,
        bench=not a.no_bench, bench_warmup=a.bench_warmup, bench_iters=a.bench_iters,
    )
    manifest = run_pipeline(cfg)
    print(f"wrote {len(manifest['outputs']) + len(manifest['timing_outputs'])} outputs and manifest.json to {a.out_dir}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest, "embed": cmd_embed, "fit": cmd_fit, "transform": cmd_transform,
    "index": cmd_index, "eval": cmd_eval, "bench": cmd_bench, "describe": cmd_describe,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"embedpca: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except ProviderError as exc:
        print(f"embedpca: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (EmbedPcaError, FileNotFoundError) as exc:
        print(f"embedpca: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
