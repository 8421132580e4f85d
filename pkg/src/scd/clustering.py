"""Non-parametric clustering of visual features.

Three variants share one Lloyd engine: plain k-means, semi-supervised
k-means (labeled instances of a class are fixed to a reserved cluster), and
constrained semi-supervised k-means whose assignment step solves a minimum
cost flow so every cluster keeps at least ``min_size`` members.

Seeding protocol (stable contract, mirrored by test oracles): restart ``r``
uses ``numpy.random.default_rng(seed + r)``; k-means++ draws one
``rng.integers(pool_size)`` for the first free center, then one
``rng.random()`` per remaining center for inverse-CDF sampling on squared
distances (falling back to ``rng.integers(pool_size)`` when all distances
are zero).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._parallel import run_chunked
from .errors import InfeasibleSizeConstraint, KTooLarge, TooManyLabeledClasses
from .solvers import FlowNetwork, solve_mcf
from .store import EmbeddingMatrix, InstanceMeta


@dataclass
class ClusterConfig:
    n_clusters: int
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-6
    restarts: int = 10
    min_size: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.min_size is not None and self.min_size < 0:
            raise ValueError("min_size must be >= 0")


@dataclass
class ClusterAssignment:
    assignment: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations_run: int

    @property
    def n_clusters(self) -> int:
        return int(self.centroids.shape[0])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters)


def as_feature_array(z) -> np.ndarray:
    """Coerce an EmbeddingMatrix or array-like to a float64 2-D array."""
    if isinstance(z, EmbeddingMatrix):
        z = z.data
    X = np.asarray(z, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def squared_distances(X: np.ndarray, C: np.ndarray, threads: int = 1) -> np.ndarray:
    """Pairwise squared Euclidean distances, chunked over rows of X."""
    xx = np.einsum("ij,ij->i", X, X)
    cc = np.einsum("ij,ij->i", C, C)
    out = np.empty((X.shape[0], C.shape[0]), dtype=np.float64)

    def fill(s, e):
        block = xx[s:e, None] - 2.0 * (X[s:e] @ C.T) + cc[None, :]
        np.maximum(block, 0.0, out=block)
        out[s:e] = block
        return None

    run_chunked(fill, X.shape[0], threads=threads)
    return out


def _kmeans_pp(X, pool, k_new, rng, preset=None):
    """k-means++ seeding over X[pool], optionally on top of preset centers."""
    centers = [] if preset is None else [np.array(row, dtype=np.float64) for row in preset]
    P = X[pool]
    if k_new > 0 and not centers:
        first = pool[int(rng.integers(pool.size))]
        centers.append(X[first].copy())
        k_new -= 1
    if k_new <= 0:
        return np.vstack(centers)
    d2 = np.full(pool.size, np.inf)
    for ctr in centers:
        d2 = np.minimum(d2, ((P - ctr) ** 2).sum(axis=1))
    for _ in range(k_new):
        total = float(d2.sum())
        if total <= 0.0:
            pos = int(rng.integers(pool.size))
        else:
            r = rng.random() * total
            pos = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            pos = min(pos, pool.size - 1)
        ctr = X[pool[pos]].copy()
        centers.append(ctr)
        d2 = np.minimum(d2, ((P - ctr) ** 2).sum(axis=1))
    return np.vstack(centers)


def _means(X, labels, n_clusters):
    sums = np.zeros((n_clusters, X.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=n_clusters).astype(np.float64)
    return sums / counts[:, None]


def _repair_empty(labels, n_clusters, movable, point_costs):
    """Move the farthest movable point into each empty cluster."""
    sizes = np.bincount(labels, minlength=n_clusters)
    empties = np.flatnonzero(sizes == 0)
    if empties.size == 0:
        return labels
    labels = labels.copy()
    point_costs = point_costs.copy()
    for c in empties:
        candidates = movable & (sizes[labels] >= 2)
        if not candidates.any():
            candidates = movable & (labels != c)
        if not candidates.any():
            raise KTooLarge(f"cannot repopulate empty cluster {c}: no movable points")
        masked = np.where(candidates, point_costs, -np.inf)
        far = int(np.argmax(masked))
        sizes[labels[far]] -= 1
        labels[far] = c
        sizes[c] = 1
        point_costs[far] = 0.0
    return labels


def build_flow_network(distances: np.ndarray, deficits: np.ndarray) -> FlowNetwork:
    """Assignment-with-minimum-sizes network: unit-supply point nodes, one
    node per cluster whose arc to the sink carries a lower bound equal to the
    cluster's remaining deficit."""
    distances = np.asarray(distances, dtype=np.float64)
    n_points, n_clusters = distances.shape
    deficits = np.asarray(deficits, dtype=np.int64)
    if deficits.shape != (n_clusters,) or (deficits < 0).any():
        raise ValueError("deficits must be one non-negative integer per cluster")
    sink = n_points + n_clusters
    supply = [1] * n_points + [0] * n_clusters + [-n_points]
    net = FlowNetwork(n_nodes=sink + 1, arcs=[], supply=supply)
    for u in range(n_points):
        for c in range(n_clusters):
            net.add_arc(u, n_points + c, capacity=1, lower=0, cost=float(distances[u, c]))
    for c in range(n_clusters):
        net.add_arc(n_points + c, sink, capacity=n_points, lower=int(deficits[c]), cost=0.0)
    return net


def assign_min_size(distances: np.ndarray, deficits: np.ndarray) -> np.ndarray:
    """Min-cost point-to-cluster assignment with per-cluster deficits."""
    n_points, n_clusters = distances.shape
    result = solve_mcf(build_flow_network(distances, deficits))
    point_arcs = result.flows[: n_points * n_clusters].reshape(n_points, n_clusters)
    labels = np.argmax(point_arcs, axis=1).astype(np.int64)
    return labels


def _fit_once(X, n_clusters, init_centers, fixed, min_size, cfg, on_iteration=None, restart=0):
    """One Lloyd run. fixed[i] is the forced cluster of instance i or -1."""
    n = X.shape[0]
    centroids = np.array(init_centers, dtype=np.float64)
    movable = fixed < 0
    free_idx = np.flatnonzero(movable)
    fixed_idx = np.flatnonzero(~movable)
    labeled_counts = np.bincount(fixed[fixed_idx], minlength=n_clusters) if fixed_idx.size else np.zeros(n_clusters, dtype=np.int64)
    deficits = None
    if min_size is not None:
        deficits = np.maximum(0, min_size - labeled_counts)

    labels_prev = None
    obj_prev = None
    iterations = 0
    for it in range(1, cfg.max_iter + 1):
        iterations = it
        d2 = squared_distances(X, centroids, threads=cfg.threads)
        labels = np.empty(n, dtype=np.int64)
        if fixed_idx.size:
            labels[fixed_idx] = fixed[fixed_idx]
        if free_idx.size:
            if deficits is not None and deficits.any():
                labels[free_idx] = assign_min_size(d2[free_idx], deficits)
            else:
                labels[free_idx] = np.argmin(d2[free_idx], axis=1)
        point_costs = d2[np.arange(n), labels]
        labels = _repair_empty(labels, n_clusters, movable, point_costs)
        new_centroids = _means(X, labels, n_clusters)
        objective = float(((X - new_centroids[labels]) ** 2).sum())
        if on_iteration is not None:
            on_iteration(restart, it, labels, new_centroids, objective)
        converged = (
            (labels_prev is not None and np.array_equal(labels, labels_prev))
            or np.array_equal(new_centroids, centroids)
            or objective == 0.0
            or (obj_prev is not None and obj_prev > 0.0
                and (obj_prev - objective) / obj_prev < cfg.tol)
        )
        centroids = new_centroids
        labels_prev = labels
        obj_prev = objective
        if converged:
            break
    return ClusterAssignment(assignment=labels_prev, centroids=centroids,
                             objective=obj_prev, iterations_run=iterations)


def _fixed_from_meta(metas: list[InstanceMeta], n_rows: int, n_clusters: int) -> np.ndarray:
    """Map labeled classes to reserved cluster ids 0..|Y_L|-1 by ascending gt id."""
    fixed = np.full(n_rows, -1, dtype=np.int64)
    labeled_ids = sorted({m.gt_name_id for m in metas if m.labeled})
    if len(labeled_ids) > n_clusters:
        raise TooManyLabeledClasses(
            f"{len(labeled_ids)} labeled classes exceed n_clusters={n_clusters}")
    rank = {gid: r for r, gid in enumerate(labeled_ids)}
    for m in metas:
        if m.labeled:
            fixed[m.row] = rank[m.gt_name_id]
    return fixed


def _fit_family(X, fixed, cfg: ClusterConfig, min_size, on_iteration=None) -> ClusterAssignment:
    n, _ = X.shape
    K = cfg.n_clusters
    if n < K:
        raise KTooLarge(f"{n} instances cannot form {K} clusters")
    n_reserved = int(fixed.max()) + 1 if (fixed >= 0).any() else 0
    if n_reserved:
        lab_idx = np.flatnonzero(fixed >= 0)
        reserved = _means(X[lab_idx], fixed[lab_idx], n_reserved)
    else:
        reserved = None
    pool = np.flatnonzero(fixed < 0)
    remaining = K - n_reserved
    if remaining > 0 and pool.size == 0:
        raise KTooLarge(f"no unlabeled instances to seed {remaining} extra clusters")
    if min_size is not None:
        labeled_counts = np.bincount(fixed[fixed >= 0], minlength=K)
        short = int(np.maximum(0, min_size - labeled_counts).sum())
        if short > pool.size:
            raise InfeasibleSizeConstraint(
                f"min_size={min_size} with K={K} needs {short} more instances "
                f"but only {pool.size} of M={n} are assignable")
    restarts = cfg.restarts if remaining > 0 else 1
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(cfg.seed + r)
        if remaining > 0:
            init = _kmeans_pp(X, pool, remaining, rng, preset=reserved)
        else:
            init = reserved
        result = _fit_once(X, K, init, fixed, min_size, cfg, on_iteration=on_iteration, restart=r)
        if best is None or result.objective < best.objective:
            best = result
    return best


def kmeans(z, cfg: ClusterConfig, on_iteration=None) -> ClusterAssignment:
    """Best-of-restarts Lloyd k-means with k-means++ initialization."""
    X = as_feature_array(z)
    fixed = np.full(X.shape[0], -1, dtype=np.int64)
    return _fit_family(X, fixed, cfg, min_size=None, on_iteration=on_iteration)


def ss_kmeans(z, metas: list[InstanceMeta], cfg: ClusterConfig, on_iteration=None) -> ClusterAssignment:
    """Semi-supervised k-means: labeled instances of a class share a reserved cluster."""
    X = as_feature_array(z)
    fixed = _fixed_from_meta(metas, X.shape[0], cfg.n_clusters)
    return _fit_family(X, fixed, cfg, min_size=None, on_iteration=on_iteration)


def css_kmeans(z, metas: list[InstanceMeta], cfg: ClusterConfig, on_iteration=None) -> ClusterAssignment:
    """SS-k-means whose assignment step enforces a per-cluster minimum size."""
    X = as_feature_array(z)
    fixed = _fixed_from_meta(metas, X.shape[0], cfg.n_clusters)
    tau = cfg.min_size if cfg.min_size is not None else default_min_size(X.shape[0], cfg.n_clusters)
    return _fit_family(X, fixed, cfg, min_size=tau, on_iteration=on_iteration)


def default_min_size(n_instances: int, n_clusters: int) -> int:
    return n_instances // (2 * n_clusters)


def write_cluster_assignment(assign: ClusterAssignment, metas: list[InstanceMeta],
                             jsonl_path, summary_path, *, tau=None, seed=None) -> None:
    order = sorted(metas, key=lambda m: m.row)
    with open(jsonl_path, "w", encoding="utf-8") as f:
        for m in order:
            f.write(json.dumps({"instance_id": m.instance_id,
                                "cluster": int(assign.assignment[m.row])}) + "\n")
    summary = {
        "objective": assign.objective,
        "iterations_run": assign.iterations_run,
        "K": assign.n_clusters,
        "tau": tau,
        "seed": seed,
    }
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


class ConstrainedKMeans(BaseEstimator, ClusterMixin):
    """Estimator wrapper over the k-means family.

    ``fit(X, y)`` accepts optional per-sample class ids in ``y`` (use -1 or
    None for unlabeled samples); labeled classes are pinned to reserved
    clusters. With ``min_size`` set, assignment respects the per-cluster
    minimum via min cost flow.
    """

    def __init__(self, n_clusters=8, *, min_size=None, seed=0, max_iter=300,
                 tol=1e-6, restarts=10, threads=1):
        self.n_clusters = n_clusters
        self.min_size = min_size
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.threads = threads

    def _config(self):
        return ClusterConfig(n_clusters=self.n_clusters, seed=self.seed,
                             max_iter=self.max_iter, tol=self.tol,
                             restarts=self.restarts, min_size=self.min_size,
                             threads=self.threads)

    def fit(self, X, y=None):
        X = as_feature_array(X)
        cfg = self._config()
        if y is None:
            fixed = np.full(X.shape[0], -1, dtype=np.int64)
        else:
            y = np.asarray([-1 if v is None else int(v) for v in y], dtype=np.int64)
            if y.shape[0] != X.shape[0]:
                raise ValueError("y must have one entry per sample")
            fixed = np.full(X.shape[0], -1, dtype=np.int64)
            labeled_ids = sorted(set(y[y >= 0].tolist()))
            if len(labeled_ids) > cfg.n_clusters:
                raise TooManyLabeledClasses(
                    f"{len(labeled_ids)} labeled classes exceed n_clusters={cfg.n_clusters}")
            rank = {gid: r for r, gid in enumerate(labeled_ids)}
            for i, v in enumerate(y):
                if v >= 0:
                    fixed[i] = rank[int(v)]
        min_size = cfg.min_size
        result = _fit_family(X, fixed, cfg, min_size=min_size)
        self.labels_ = result.assignment
        self.cluster_centers_ = result.centroids
        self.inertia_ = result.objective
        self.n_iter_ = result.iterations_run
        self.assignment_ = result
        return self

    def predict(self, X):
        X = as_feature_array(X)
        d2 = squared_distances(X, self.cluster_centers_, threads=self.threads)
        return np.argmin(d2, axis=1).astype(np.int64)
