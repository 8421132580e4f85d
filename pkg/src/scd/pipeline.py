"""Batch orchestration: validated run configs, pipeline steps, manifests.

Every step validates all of its inputs before writing any output file.
Artifacts are hashed (sha256) into a manifest; reruns with the same config
must reproduce identical hashes.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, asdict, fields as dc_fields
from pathlib import Path

import numpy as np

from . import clustering, naming
from .errors import ConfigError, ManifestConflict
from .metrics import evaluate
from .store import (
    load_embeddings,
    load_meta,
    load_vocabulary,
    normalize_rows,
    validate_meta,
)
from .taxonomy import parse_wordnet_noun


def log_event(event: str, level: str = "info", **fields) -> None:
    rec = {"level": level, "event": event}
    rec.update(fields)
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


ALGOS = ("kmeans", "sskm", "csskm")
MODES = ("unsupervised", "partial")

# Execution-only knobs; excluded from the manifest's config echo so manifests
# are identical across worker counts.
NON_REPRODUCIBLE_KEYS = ("threads", "force")


@dataclass
class RunConfig:
    features: str | None = None
    clip_visual: str | None = None
    clip_names: str | None = None
    vocab: str | None = None
    meta: str | None = None
    taxonomy: str | None = None
    clusters: str | None = None
    pred: str | None = None
    out: str | None = None
    k: int | None = None
    algo: str = "kmeans"
    min_size: int | None = None
    m: int = 10
    seed: int = 0
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    max_refine_iter: int = 50
    mode: str = "unsupervised"
    normalize: bool = True
    threads: int = 1
    force: bool = False

    @classmethod
    def from_sources(cls, config_path=None, overrides=None) -> "RunConfig":
        """Config file values first, then any non-None CLI override."""
        values = {}
        if config_path is not None:
            try:
                with open(config_path, "r", encoding="utf-8") as f:
                    raw = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{config_path}: invalid JSON ({e.msg})") from None
            if not isinstance(raw, dict):
                raise ConfigError(f"{config_path}: config must be a JSON object")
            known = {f.name for f in dc_fields(cls)}
            for key, val in raw.items():
                if key not in known:
                    raise ConfigError(f"{config_path}: unknown config key {key!r}")
                values[key] = val
        for key, val in (overrides or {}).items():
            if val is not None:
                values[key] = val
        return cls(**values)

    def reproducible_dict(self) -> dict:
        d = asdict(self)
        for key in NON_REPRODUCIBLE_KEYS:
            d.pop(key, None)
        return d

    def require(self, *names: str) -> None:
        for n in names:
            if getattr(self, n) is None:
                raise ConfigError(f"missing required setting {n!r}")

    def validate_common(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.min_size is not None and self.algo != "csskm":
            raise ConfigError("min_size only applies to --algo csskm")
        if self.mode == "partial" and self.algo == "kmeans":
            raise ConfigError("mode=partial needs --algo sskm or csskm")
        for name in ("features", "clip_visual", "clip_names", "vocab", "meta",
                     "taxonomy", "clusters", "pred"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def check_outputs_writable(paths, force: bool) -> None:
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ManifestConflict(
            "output exists, pass --force to overwrite: " + ", ".join(existing))


@dataclass
class Inputs:
    features: np.ndarray | None
    zv: np.ndarray | None
    names: np.ndarray | None
    vocab: object
    metas: list
    graph: object | None


def load_inputs(cfg: RunConfig, *, need_features=False, need_clip=False,
                need_taxonomy=False) -> Inputs:
    cfg.validate_common()
    cfg.require("vocab", "meta")
    vocab = load_vocabulary(cfg.vocab)
    metas = load_meta(cfg.meta)

    features = zv = names = None
    n_rows = None
    if need_features:
        src = cfg.features or cfg.clip_visual
        if src is None:
            raise ConfigError("missing required setting 'features' (or 'clip_visual')")
        mat = load_embeddings(src)
        mat = normalize_rows(mat) if cfg.normalize else mat
        features = mat.data.astype(np.float64)
        n_rows = mat.rows
    if need_clip:
        cfg.require("clip_visual", "clip_names")
        vmat = load_embeddings(cfg.clip_visual)
        nmat = load_embeddings(cfg.clip_names)
        vmat = normalize_rows(vmat) if cfg.normalize else vmat
        nmat = normalize_rows(nmat) if cfg.normalize else nmat
        if nmat.rows != len(vocab):
            raise ConfigError(
                f"name embeddings have {nmat.rows} rows but the vocabulary has {len(vocab)}")
        zv = vmat.data.astype(np.float64)
        names = nmat.data.astype(np.float64)
        if n_rows is not None and vmat.rows != n_rows:
            raise ConfigError("features and clip_visual row counts differ")
        n_rows = vmat.rows
    validate_meta(metas, n_rows=n_rows, vocab_size=len(vocab))
    if cfg.mode == "partial" and not any(m.labeled for m in metas):
        raise ConfigError("mode=partial but no labeled instances in meta")

    graph = None
    if need_taxonomy and cfg.taxonomy is not None:
        graph = parse_wordnet_noun(cfg.taxonomy)
    return Inputs(features=features, zv=zv, names=names, vocab=vocab,
                  metas=metas, graph=graph)


def _cluster_config(cfg: RunConfig) -> clustering.ClusterConfig:
    return clustering.ClusterConfig(
        n_clusters=cfg.k, seed=cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol,
        restarts=cfg.restarts, min_size=cfg.min_size, threads=cfg.threads)


def run_cluster(cfg: RunConfig, inputs: Inputs | None = None):
    cfg.require("k", "out")
    inputs = inputs or load_inputs(cfg, need_features=True)
    out = Path(cfg.out)
    paths = {"clusters": out / "clusters.jsonl",
             "cluster_summary": out / "cluster_summary.json"}
    check_outputs_writable(paths.values(), cfg.force)
    out.mkdir(parents=True, exist_ok=True)

    ccfg = _cluster_config(cfg)
    if cfg.algo == "kmeans":
        assign = clustering.kmeans(inputs.features, ccfg)
    elif cfg.algo == "sskm":
        assign = clustering.ss_kmeans(inputs.features, inputs.metas, ccfg)
    else:
        assign = clustering.css_kmeans(inputs.features, inputs.metas, ccfg)
    tau = None
    if cfg.algo == "csskm":
        tau = cfg.min_size if cfg.min_size is not None else clustering.default_min_size(
            inputs.features.shape[0], cfg.k)
    clustering.write_cluster_assignment(assign, inputs.metas, paths["clusters"],
                                        paths["cluster_summary"], tau=tau, seed=cfg.seed)
    log_event("cluster_done", objective=assign.objective,
              iterations=assign.iterations_run, k=cfg.k, algo=cfg.algo)
    return assign, {k: str(v) for k, v in paths.items()}


def _read_cluster_labels(clusters_path, metas) -> np.ndarray:
    by_id = {}
    with open(clusters_path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                by_id[rec["instance_id"]] = int(rec["cluster"])
    labels = np.empty(len(metas), dtype=np.int64)
    for m in metas:
        if m.instance_id not in by_id:
            raise ConfigError(f"cluster file lacks instance {m.instance_id!r}")
        labels[m.row] = by_id[m.instance_id]
    return labels


def run_name(cfg: RunConfig, inputs: Inputs | None = None, cluster_labels=None,
             clusters_path=None):
    cfg.require("out")
    inputs = inputs or load_inputs(cfg, need_clip=True)
    if cluster_labels is None:
        if clusters_path is None:
            raise ConfigError("naming needs cluster labels (run cluster first)")
        cluster_labels = _read_cluster_labels(clusters_path, inputs.metas)
    else:
        cluster_labels = naming._labels_of(cluster_labels)
    out = Path(cfg.out)
    paths = {"naming": out / "naming.jsonl",
             "naming_summary": out / "naming_summary.json"}
    check_outputs_writable(paths.values(), cfg.force)
    out.mkdir(parents=True, exist_ok=True)

    pins = None
    if cfg.mode == "partial":
        pins = naming.partially_supervised_pin(cluster_labels, inputs.metas, inputs.vocab)
    ncfg = naming.NamingConfig(m=cfg.m, max_refine_iter=cfg.max_refine_iter,
                               threads=cfg.threads)
    result = naming.refine_loop(inputs.zv, inputs.names, cluster_labels, ncfg, pinned=pins)
    naming.write_naming_result(result, inputs.metas, inputs.vocab,
                               paths["naming"], paths["naming_summary"], m=cfg.m, pinned=pins)
    log_event("name_done", iterations=result.iterations,
              n_names=len(set(result.cluster_names.tolist())))
    return result, {k: str(v) for k, v in paths.items()}


def run_zeroshot(cfg: RunConfig, inputs: Inputs | None = None):
    cfg.require("out")
    inputs = inputs or load_inputs(cfg, need_clip=True)
    out = Path(cfg.out)
    paths = {"zeroshot": out / "zeroshot.jsonl",
             "zeroshot_summary": out / "zeroshot_summary.json"}
    check_outputs_writable(paths.values(), cfg.force)
    out.mkdir(parents=True, exist_ok=True)

    pred = naming.zero_shot_assign(inputs.zv, inputs.names, threads=cfg.threads)
    order = sorted(inputs.metas, key=lambda m: m.row)
    with open(paths["zeroshot"], "w", encoding="utf-8") as f:
        for m in order:
            nid = int(pred[m.row])
            f.write(json.dumps({"instance_id": m.instance_id, "name_id": nid,
                                "lemma": inputs.vocab.lemma(nid)}) + "\n")
    with open(paths["zeroshot_summary"], "w", encoding="utf-8") as f:
        json.dump({"n_unique_names": int(np.unique(pred).size)}, f, indent=2, sort_keys=True)
        f.write("\n")
    log_event("zeroshot_done", n_unique=int(np.unique(pred).size))
    return pred, {k: str(v) for k, v in paths.items()}


def _read_predictions(path, metas) -> tuple[np.ndarray, str]:
    """Read a naming or clustering JSONL; returns (values by row, kind)."""
    by_id = {}
    kind = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            this_kind = "name_id" if "name_id" in rec else "cluster"
            if kind is None:
                kind = this_kind
            by_id[rec["instance_id"]] = int(rec[this_kind])
    if kind is None:
        raise ConfigError(f"{path}: no predictions found")
    values = np.empty(len(metas), dtype=np.int64)
    for m in metas:
        if m.instance_id not in by_id:
            raise ConfigError(f"{path}: missing prediction for {m.instance_id!r}")
        values[m.row] = by_id[m.instance_id]
    return values, kind


def run_eval(cfg: RunConfig, pred_path, inputs: Inputs | None = None,
             report_name: str = "report.json", pred_name_set=None):
    cfg.require("out")
    inputs = inputs or load_inputs(cfg, need_taxonomy=True)
    out = Path(cfg.out)
    report_path = out / report_name
    check_outputs_writable([report_path], cfg.force)
    out.mkdir(parents=True, exist_ok=True)

    pred_by_row, kind = _read_predictions(pred_path, inputs.metas)
    eval_rows = [m for m in sorted(inputs.metas, key=lambda x: x.row) if not m.labeled]
    if not eval_rows:
        raise ConfigError("no unlabeled instances to evaluate")
    missing = [m.instance_id for m in eval_rows if m.gt_name_id is None]
    if missing:
        raise ConfigError(f"{len(missing)} evaluation instances lack gt_name_id "
                          f"(first: {missing[0]!r})")
    gt = np.array([m.gt_name_id for m in eval_rows], dtype=np.int64)
    pred = np.array([pred_by_row[m.row] for m in eval_rows], dtype=np.int64)
    labeled_classes = {m.gt_name_id for m in inputs.metas if m.labeled}
    old_mask = np.array([m.gt_name_id in labeled_classes for m in eval_rows], dtype=bool)

    if kind == "cluster":
        # Clustering-only predictions carry no names: report ACC block only.
        from .metrics import split_acc
        acc_all, acc_old, acc_new, mapping = split_acc(pred, gt, old_mask)
        report_dict = {
            "sacc": None, "soft_sacc": None,
            "acc_all": acc_all, "acc_old": acc_old, "acc_new": acc_new,
            "name_iou": None, "n_instances": int(pred.shape[0]),
            "n_old": int(old_mask.sum()), "n_new": int((~old_mask).sum()),
            "permutation": {str(k): v for k, v in sorted(mapping.items())},
            "class_counts": {}, "acc_skipped_reason": None,
        }
        table = f"{'metric':<12}{'All':>8}{'Old':>8}{'New':>8}\n" + \
                f"{'ACC':<12}{100 * acc_all:8.1f}" + \
                (f"{100 * acc_old:8.1f}" if acc_old is not None else f"{'-':>8}") + \
                (f"{100 * acc_new:8.1f}" if acc_new is not None else f"{'-':>8}")
    else:
        report = evaluate(pred, gt, old_mask=old_mask, graph=inputs.graph,
                          vocab=inputs.vocab, pred_name_set=pred_name_set)
        report_dict = report.to_dict()
        table = report.table()

    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report_dict, f, indent=2, sort_keys=True)
        f.write("\n")
    print(table)
    log_event("eval_done", report=str(report_path))
    return report_dict, {report_name: str(report_path)}


def run_pipeline(cfg: RunConfig):
    cfg.require("k", "out")
    inputs = load_inputs(cfg, need_features=True, need_clip=True, need_taxonomy=True)
    out = Path(cfg.out)
    manifest_path = out / "manifest.json"
    check_outputs_writable([manifest_path], cfg.force)

    artifacts = {}
    assign, paths = run_cluster(cfg, inputs)
    artifacts.update(paths)
    result, paths = run_name(cfg, inputs, cluster_labels=assign)
    artifacts.update(paths)
    zs_pred, paths = run_zeroshot(cfg, inputs)
    artifacts.update(paths)
    _, paths = run_eval(cfg, artifacts["naming"], inputs, report_name="report.json",
                        pred_name_set=set(result.cluster_names.tolist()))
    artifacts.update(paths)
    _, paths = run_eval(cfg, artifacts["zeroshot"], inputs,
                        report_name="report_zeroshot.json")
    artifacts.update(paths)

    manifest = {
        "config": cfg.reproducible_dict(),
        "artifacts": {Path(p).name: sha256_file(p) for p in sorted(artifacts.values())},
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    log_event("pipeline_done", manifest=str(manifest_path))
    return manifest, str(manifest_path)
