"""Command-line entry point.

Subcommands: cluster, name, zeroshot, eval, pipeline, taxonomy export,
synth planted, synth taxonomy. Settings come from an optional JSON config
(--config); any flag given on the command line overrides the config key of
the same name. Logs are JSON lines on stderr; results go to stdout and
files. Exit codes: 0 ok, 2 validation, 3 infeasible, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from .errors import SCDError
from .pipeline import (
    RunConfig,
    log_event,
    run_cluster,
    run_eval,
    run_name,
    run_pipeline,
    run_zeroshot,
)
from .synthgen import PlantedSpec, gen_planted, write_planted, write_taxonomy_fixture
from .taxonomy import load_taxonomy_tsv, parse_wordnet_noun


def _add_run_flags(p: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "features": dict(help="EMB1 features for clustering"),
        "clip_visual": dict(help="EMB1 visual embeddings for naming"),
        "clip_names": dict(help="EMB1 name embeddings aligned to the vocabulary"),
        "vocab": dict(help="vocabulary JSONL"),
        "meta": dict(help="instance metadata JSONL"),
        "taxonomy": dict(help="WordNet data.noun for Soft-sACC"),
        "clusters": dict(help="cluster assignment JSONL from a previous run"),
        "pred": dict(help="prediction JSONL to evaluate"),
        "out": dict(help="output directory"),
        "k": dict(type=int, help="number of clusters"),
        "algo": dict(choices=("kmeans", "sskm", "csskm"), help="clustering algorithm"),
        "min_size": dict(type=int, help="per-cluster minimum size (csskm)"),
        "m": dict(type=int, help="m-NN voting width"),
        "restarts": dict(type=int, help="k-means restarts"),
        "max_iter": dict(type=int, help="k-means iteration cap"),
        "tol": dict(type=float, help="relative objective-change stopping threshold"),
        "max_refine_iter": dict(type=int, help="refinement iteration cap"),
        "mode": dict(choices=("unsupervised", "partial"), help="supervision mode"),
    }
    for name in names:
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, default=None, **spec[name])
    p.add_argument("--config", default=None, help="JSON config; flags override its keys")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="worker threads (0 = auto)")
    p.add_argument("--force", action="store_const", const=True, default=None,
                   help="overwrite existing outputs")
    p.add_argument("--raw-features", dest="normalize", action="store_const",
                   const=False, default=None, help="skip L2 normalization of inputs")


def _config_from_args(args) -> RunConfig:
    known = {f.name for f in dc_fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in known}
    return RunConfig.from_sources(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="cluster visual features")
    _add_run_flags(p, "features", "clip_visual", "vocab", "meta", "out", "k",
                   "algo", "min_size", "restarts", "max_iter", "tol", "mode")
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("name", help="vote, de-duplicate, and refine cluster names")
    _add_run_flags(p, "clip_visual", "clip_names", "vocab", "meta", "clusters",
                   "out", "m", "max_refine_iter", "mode")
    p.set_defaults(fn=cmd_name)

    p = sub.add_parser("zeroshot", help="nearest-name baseline over the full vocabulary")
    _add_run_flags(p, "clip_visual", "clip_names", "vocab", "meta", "out")
    p.set_defaults(fn=cmd_zeroshot)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    _add_run_flags(p, "pred", "vocab", "meta", "taxonomy", "out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("pipeline", help="cluster, name, zeroshot, and eval in sequence")
    _add_run_flags(p, "features", "clip_visual", "clip_names", "vocab", "meta",
                   "taxonomy", "out", "k", "algo", "min_size", "m", "restarts",
                   "max_iter", "tol", "max_refine_iter", "mode")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("taxonomy", help="taxonomy utilities")
    tsub = p.add_subparsers(dest="taxonomy_command", required=True)
    pe = tsub.add_parser("export", help="parse data.noun and export a TSV edge list")
    pe.add_argument("--input", required=True, help="data.noun or edge-list TSV")
    pe.add_argument("--lemmas-in", default=None, help="lemma map TSV (with TSV input)")
    pe.add_argument("--edges", required=True, help="output edge-list TSV")
    pe.add_argument("--lemmas", default=None, help="output lemma map TSV")
    pe.set_defaults(fn=cmd_taxonomy_export)

    p = sub.add_parser("synth", help="synthetic datasets and fixtures")
    ssub = p.add_subparsers(dest="synth_command", required=True)
    pp = ssub.add_parser("planted", help="planted-truth embedding dataset")
    pp.add_argument("--k", type=int, required=True)
    pp.add_argument("--n", type=int, required=True, help="vocabulary size")
    pp.add_argument("--dim", type=int, required=True)
    pp.add_argument("--per-class", type=int, required=True)
    pp.add_argument("--sigma", type=float, default=0.0)
    pp.add_argument("--labeled-frac", type=float, default=0.0)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", required=True)
    pp.set_defaults(fn=cmd_synth_planted)
    pt = ssub.add_parser("taxonomy", help="complete b-ary taxonomy fixture")
    pt.add_argument("--depth", type=int, required=True)
    pt.add_argument("--branching", type=int, required=True)
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=cmd_synth_taxonomy)

    return parser


def cmd_cluster(args) -> int:
    cfg = _config_from_args(args)
    _, paths = run_cluster(cfg)
    print(json.dumps(paths, sort_keys=True))
    return 0


def cmd_name(args) -> int:
    cfg = _config_from_args(args)
    cfg.require("clusters")
    cfg.validate_common()
    _, paths = run_name(cfg, clusters_path=cfg.clusters)
    print(json.dumps(paths, sort_keys=True))
    return 0


def cmd_zeroshot(args) -> int:
    cfg = _config_from_args(args)
    _, paths = run_zeroshot(cfg)
    print(json.dumps(paths, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    cfg.require("pred")
    cfg.validate_common()
    run_eval(cfg, cfg.pred)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    _, manifest_path = run_pipeline(cfg)
    print(json.dumps({"manifest": manifest_path}, sort_keys=True))
    return 0


def cmd_taxonomy_export(args) -> int:
    if args.input.endswith(".tsv"):
        graph = load_taxonomy_tsv(args.input, args.lemmas_in)
    else:
        graph = parse_wordnet_noun(args.input)
    graph.export_tsv(args.edges, args.lemmas)
    log_event("taxonomy_exported", synsets=len(graph), depth=graph.depth)
    print(json.dumps({"edges": args.edges, "lemmas": args.lemmas,
                      "synsets": len(graph), "depth": graph.depth}, sort_keys=True))
    return 0


def cmd_synth_planted(args) -> int:
    spec = PlantedSpec(n_classes=args.k, vocab_size=args.n, dim=args.dim,
                       per_class=args.per_class, noise=args.sigma,
                       labeled_frac=args.labeled_frac, seed=args.seed)
    paths = write_planted(gen_planted(spec), args.out)
    print(json.dumps(paths, sort_keys=True))
    return 0


def cmd_synth_taxonomy(args) -> int:
    paths = write_taxonomy_fixture(args.depth, args.branching, args.out)
    print(json.dumps(paths, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SCDError as e:
        log_event("error", level="error", kind=type(e).__name__, message=str(e))
        return e.exit_code
    except OSError as e:
        log_event("error", level="error", kind=type(e).__name__, message=str(e))
        return 4


if __name__ == "__main__":
    sys.exit(main())
