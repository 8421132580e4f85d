"""Zero-shot naming, per-cluster vote tables, de-duplicated name selection,
and the iterative refinement loop.

All similarity scans are cosine via dot products on unit-normalized rows and
accumulate in float64. Every tie anywhere breaks toward the smallest index,
which keeps the whole pipeline deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._parallel import run_chunked
from .clustering import ClusterAssignment, as_feature_array
from .errors import CandidatePoolTooSmall, DimMismatch, MissingGroundTruthName, ZeroNormRow
from .solvers import hungarian
from .store import InstanceMeta, Vocabulary

# Hungarian cost for (cluster, name) pairs outside the cluster's candidate
# list; larger than any -fraction so they are chosen only when unavoidable.
NON_CANDIDATE_COST = 1.0


@dataclass
class NamingConfig:
    m: int = 10
    max_refine_iter: int = 50
    threads: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.max_refine_iter < 1:
            raise ValueError("max_refine_iter must be >= 1")


@dataclass
class VoteTable:
    """Per-cluster m-NN vote counts plus the top-m candidate fractions."""

    m: int
    cluster_sizes: np.ndarray
    counts: list[dict[int, int]]
    candidates: list[list[tuple[int, float]]]


@dataclass
class Classifier:
    """Zero-shot linear classifier: row c is the unit embedding of cluster c's name."""

    weights: np.ndarray
    cluster_names: np.ndarray


@dataclass
class RefineStep:
    cluster_names: np.ndarray
    change_count: int


@dataclass
class NamingResult:
    cluster_names: np.ndarray
    instance_names: np.ndarray
    iterations: int
    trace: list[RefineStep] = field(default_factory=list)


def _labels_of(assign) -> np.ndarray:
    if isinstance(assign, ClusterAssignment):
        return assign.assignment
    return np.asarray(assign, dtype=np.int64)


def _check_dims(zv: np.ndarray, names: np.ndarray) -> None:
    if zv.shape[1] != names.shape[1]:
        raise DimMismatch(f"visual dim {zv.shape[1]} != name dim {names.shape[1]}")


def zero_shot_assign(zv, names, threads: int = 1) -> np.ndarray:
    """Nearest name index per instance; ties go to the smallest index."""
    zv = as_feature_array(zv)
    names = as_feature_array(names)
    _check_dims(zv, names)
    out = np.empty(zv.shape[0], dtype=np.int64)

    def fill(s, e):
        out[s:e] = np.argmax(zv[s:e] @ names.T, axis=1)
        return None

    run_chunked(fill, zv.shape[0], threads=threads)
    return out


def top_m_names(zv, names, m: int, threads: int = 1, exclude=None) -> np.ndarray:
    """Each instance's m nearest names, ordered by (similarity desc, index asc)."""
    zv = as_feature_array(zv)
    names = as_feature_array(names)
    _check_dims(zv, names)
    n_names = names.shape[0]
    excluded = np.zeros(n_names, dtype=bool)
    if exclude is not None:
        excluded[np.asarray(sorted(exclude), dtype=np.int64)] = True
    allowed = n_names - int(excluded.sum())
    if not 1 <= m <= allowed:
        raise ValueError(f"m must be in [1, {allowed}], got {m}")
    out = np.empty((zv.shape[0], m), dtype=np.int64)

    def fill(s, e):
        sims = zv[s:e] @ names.T
        if excluded.any():
            sims[:, excluded] = -np.inf
        # stable argsort on -sims: equal similarities keep ascending index order
        out[s:e] = np.argsort(-sims, axis=1, kind="stable")[:, :m]
        return None

    run_chunked(fill, zv.shape[0], threads=threads)
    return out


def vote_cluster_names(assign, nn: np.ndarray) -> np.ndarray:
    """Modal nearest-neighbour name per cluster (smallest name id on ties)."""
    labels = _labels_of(assign)
    nn = np.asarray(nn, dtype=np.int64)
    n_clusters = int(labels.max()) + 1
    winners = np.empty(n_clusters, dtype=np.int64)
    for c in range(n_clusters):
        member_names = nn[labels == c]
        if member_names.size == 0:
            raise ValueError(f"cluster {c} is empty")
        ids, counts = np.unique(member_names, return_counts=True)
        winners[c] = ids[int(np.argmax(counts))]
    return winners


def topm_vote(assign, zv, names, m: int, threads: int = 1,
              exclude=None, skip_clusters=None) -> VoteTable:
    """Tally each instance's m nearest names inside its cluster.

    Candidate fractions are votes / cluster_size; the per-cluster candidate
    list keeps the m highest fractions (ties toward smaller name ids).
    Clusters in skip_clusters get empty tables.
    """
    labels = _labels_of(assign)
    n_clusters = int(labels.max()) + 1
    topm = top_m_names(zv, names, m, threads=threads, exclude=exclude)
    sizes = np.bincount(labels, minlength=n_clusters)
    skip = set(skip_clusters or ())
    counts: list[dict[int, int]] = []
    candidates: list[list[tuple[int, float]]] = []
    for c in range(n_clusters):
        if c in skip or sizes[c] == 0:
            counts.append({})
            candidates.append([])
            continue
        ids, votes = np.unique(topm[labels == c].ravel(), return_counts=True)
        counts.append({int(i): int(v) for i, v in zip(ids, votes)})
        order = np.lexsort((ids, -votes))[:m]
        size = float(sizes[c])
        candidates.append([(int(ids[j]), float(votes[j]) / size) for j in order])
    return VoteTable(m=m, cluster_sizes=sizes, counts=counts, candidates=candidates)


def dedup_assign(votes: VoteTable, fixed: dict[int, int] | None = None) -> np.ndarray:
    """Distinct name per cluster maximizing total candidate fractions.

    Hungarian runs on cost[c, j] = -fraction(c, j) over the union of the free
    clusters' candidates, with NON_CANDIDATE_COST for names a cluster never
    voted for. Entries of ``fixed`` are kept verbatim and their names are
    withheld from the pool.
    """
    fixed = dict(fixed or {})
    n_clusters = len(votes.candidates)
    free = [c for c in range(n_clusters) if c not in fixed]
    result = np.full(n_clusters, -1, dtype=np.int64)
    for c, name_id in fixed.items():
        result[c] = name_id
    if not free:
        return result
    fixed_names = set(fixed.values())
    pool = sorted({nid for c in free for nid, _ in votes.candidates[c]} - fixed_names)
    if len(pool) < len(free):
        raise CandidatePoolTooSmall(
            f"{len(pool)} candidate names for {len(free)} clusters")
    col = {nid: j for j, nid in enumerate(pool)}
    cost = np.full((len(free), len(pool)), NON_CANDIDATE_COST, dtype=np.float64)
    for row, c in enumerate(free):
        for nid, frac in votes.candidates[c]:
            if nid in col:
                cost[row, col[nid]] = -frac
    assignment, _ = hungarian(cost)
    for row, c in enumerate(free):
        result[c] = pool[assignment[row]]
    return result


def select_cluster_names(labels, zv, names, m: int, fixed: dict[int, int] | None = None,
                         threads: int = 1) -> tuple[np.ndarray, VoteTable]:
    """Top-m vote then Hungarian de-duplication, doubling m while the
    candidate union is too small (up to the vocabulary size)."""
    names_arr = as_feature_array(names)
    fixed = dict(fixed or {})
    limit = names_arr.shape[0] - len(fixed)
    current = min(m, limit)
    while True:
        votes = topm_vote(labels, zv, names_arr, current, threads=threads,
                          exclude=set(fixed.values()) or None,
                          skip_clusters=set(fixed.keys()) or None)
        try:
            return dedup_assign(votes, fixed=fixed), votes
        except CandidatePoolTooSmall:
            if current >= limit:
                raise
            current = min(2 * current, limit)


def build_classifier(cluster_names, names) -> Classifier:
    """Stack the chosen names' unit embeddings into a K x dim weight matrix."""
    names = as_feature_array(names)
    cluster_names = np.asarray(cluster_names, dtype=np.int64)
    weights = names[cluster_names].astype(np.float64)
    norms = np.linalg.norm(weights, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormRow(int(zero[0]))
    weights = weights / norms[:, None]
    return Classifier(weights=weights, cluster_names=cluster_names)


def classify(zv, clf: Classifier, threads: int = 1) -> np.ndarray:
    """Per-instance argmax cluster under the zero-shot classifier."""
    zv = as_feature_array(zv)
    out = np.empty(zv.shape[0], dtype=np.int64)

    def fill(s, e):
        out[s:e] = np.argmax(zv[s:e] @ clf.weights.T, axis=1)
        return None

    run_chunked(fill, zv.shape[0], threads=threads)
    return out


def refine_loop(zv, names, init_assign, cfg: NamingConfig | None = None,
                pinned=None) -> NamingResult:
    """Iterate vote -> de-duplicate -> classify -> regroup until the
    per-instance names stop changing (or max_refine_iter).

    ``pinned`` optionally fixes some clusters' names (partially supervised
    mode); pinned names never enter other clusters' candidate pools. A
    cluster that empties mid-loop keeps its previous name and votes nothing.
    """
    cfg = cfg or NamingConfig()
    zv = as_feature_array(zv)
    names = as_feature_array(names)
    _check_dims(zv, names)
    labels = _labels_of(init_assign).copy()
    n_clusters = int(labels.max()) + 1
    pins: dict[int, int] = {}
    if pinned is not None:
        for c, nid in enumerate(pinned):
            if nid is not None:
                pins[c] = int(nid)
        if len(set(pins.values())) != len(pins):
            raise ValueError("pinned names must be distinct")
    if np.bincount(labels, minlength=n_clusters).min() == 0:
        raise ValueError("initial clustering has empty clusters")

    trace: list[RefineStep] = []
    prev_instance_names = None
    prev_cluster_names = None
    cluster_names = None
    instance_names = None
    iterations = 0
    for it in range(1, cfg.max_refine_iter + 1):
        iterations = it
        fixed_now = dict(pins)
        sizes = np.bincount(labels, minlength=n_clusters)
        for c in np.flatnonzero(sizes == 0):
            fixed_now.setdefault(int(c), int(prev_cluster_names[c]))
        cluster_names, _ = select_cluster_names(labels, zv, names, cfg.m,
                                                fixed=fixed_now, threads=cfg.threads)
        clf = build_classifier(cluster_names, names)
        new_labels = classify(zv, clf, threads=cfg.threads)
        instance_names = cluster_names[new_labels]
        if prev_instance_names is None:
            change_count = int((new_labels != labels).sum())
        else:
            change_count = int((instance_names != prev_instance_names).sum())
        trace.append(RefineStep(cluster_names=cluster_names.copy(), change_count=change_count))
        converged = np.array_equal(new_labels, labels) or (
            prev_instance_names is not None
            and np.array_equal(instance_names, prev_instance_names))
        labels = new_labels
        prev_instance_names = instance_names
        prev_cluster_names = cluster_names
        if converged:
            break
    return NamingResult(cluster_names=cluster_names, instance_names=instance_names,
                        iterations=iterations, trace=trace)


def partially_supervised_pin(assign, metas: list[InstanceMeta], vocab: Vocabulary):
    """Pin each reserved cluster to its labeled class's ground-truth name."""
    labels = _labels_of(assign)
    n_clusters = int(labels.max()) + 1
    labeled_ids = sorted({m.gt_name_id for m in metas if m.labeled})
    pins: list[int | None] = [None] * n_clusters
    for rank, gid in enumerate(labeled_ids):
        if gid is None or gid >= len(vocab):
            raise MissingGroundTruthName(f"labeled class id {gid!r} not in vocabulary")
        pins[rank] = gid
    for m in metas:
        if m.labeled and labels[m.row] != labeled_ids.index(m.gt_name_id):
            raise ValueError(
                "assignment does not reserve clusters for labeled classes; "
                "run ss_kmeans or css_kmeans first")
    return pins


def write_naming_result(result: NamingResult, metas: list[InstanceMeta],
                        vocab: Vocabulary, jsonl_path, summary_path, *,
                        m=None, pinned=None) -> None:
    order = sorted(metas, key=lambda x: x.row)
    with open(jsonl_path, "w", encoding="utf-8") as f:
        for meta in order:
            nid = int(result.instance_names[meta.row])
            f.write(json.dumps({"instance_id": meta.instance_id,
                                "name_id": nid,
                                "lemma": vocab.lemma(nid)}) + "\n")
    summary = {
        "cluster_names": [int(x) for x in result.cluster_names],
        "iterations": result.iterations,
        "m": m,
        "pinned": None if pinned is None else [None if p is None else int(p) for p in pinned],
    }
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


class ZeroShotNamer(BaseEstimator):
    """Nearest-name baseline over a fixed name embedding matrix."""

    def __init__(self, name_embeddings, threads=1):
        self.name_embeddings = name_embeddings
        self.threads = threads

    def fit(self, X=None, y=None):
        return self

    def decision_function(self, X):
        X = as_feature_array(X)
        names = as_feature_array(self.name_embeddings)
        _check_dims(X, names)
        return X @ names.T

    def predict(self, X):
        return zero_shot_assign(X, self.name_embeddings, threads=self.threads)


class SemanticNamer(BaseEstimator):
    """Estimator wrapper over the refinement loop.

    ``fit(Z, y)`` takes visual embeddings and initial cluster labels; after
    fitting, ``predict`` classifies with the learned K-name classifier.
    """

    def __init__(self, name_embeddings, *, m=10, max_refine_iter=50,
                 pinned=None, threads=1):
        self.name_embeddings = name_embeddings
        self.m = m
        self.max_refine_iter = max_refine_iter
        self.pinned = pinned
        self.threads = threads

    def fit(self, X, y):
        cfg = NamingConfig(m=self.m, max_refine_iter=self.max_refine_iter,
                           threads=self.threads)
        result = refine_loop(X, self.name_embeddings, y, cfg, pinned=self.pinned)
        self.result_ = result
        self.cluster_names_ = result.cluster_names
        self.labels_ = result.instance_names
        self.classifier_ = build_classifier(result.cluster_names, self.name_embeddings)
        self.n_iter_ = result.iterations
        return self

    def predict(self, X):
        idx = classify(X, self.classifier_, threads=self.threads)
        return self.cluster_names_[idx]
