"""Acceptance criteria, one test per criterion, each printing a PASS line.

Planted-data calibrations (noise levels, seeds, and the voting width m) were
fixed once and are pinned here; see each test's comment.
"""
import itertools
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from scd.cli import main
from scd.clustering import ClusterConfig, build_flow_network, css_kmeans, kmeans, ss_kmeans
from scd.metrics import clustering_acc, sacc, soft_sacc, split_acc
from scd.naming import (
    NamingConfig,
    build_classifier,
    classify,
    refine_loop,
    vote_cluster_names,
    zero_shot_assign,
)
from scd.solvers import hungarian, solve_mcf
from scd.store import InstanceMeta, VocabEntry, Vocabulary
from scd.synthgen import PlantedSpec, gen_planted, gen_taxonomy_fixture
from scd.taxonomy import parse_wordnet_noun

# pinned planted configurations (calibrated once, frozen)
RECOVERY_SPEC = dict(n_classes=10, vocab_size=200, dim=64, per_class=30, noise=0.05, seed=7)
RECOVERY_M = 5
NOISY_SIGMA = 0.3          # ~70-75% initial-voting baseline
ABLATION_SEEDS = range(10)


def announce(name, detail):
    print(f"ACCEPTANCE PASS [{name}]: {detail}")


def test_solver_oracle_equivalence():
    rng = np.random.default_rng(100)
    start = time.perf_counter()
    for _ in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(n, 7))
        c = rng.random((n, m))
        assign, total = hungarian(c)
        best = min(sum(c[i, p[i]] for i in range(n))
                   for p in itertools.permutations(range(m), n))
        assert abs(total - best) < 1e-9
        assert len(set(assign.tolist())) == n
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    announce("solver-oracle-equivalence",
             f"200 matrices up to 6x6 match brute force within 1e-9 in {elapsed:.2f}s")


def test_mcf_constrained_assignment_correctness():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(100):
        n_points = int(rng.integers(1, 9))
        n_clusters = int(rng.integers(1, 4))
        tau = int(rng.integers(0, max(1, n_points // n_clusters) + 1))
        d2 = rng.random((n_points, n_clusters))
        deficits = np.full(n_clusters, tau)
        result = solve_mcf(build_flow_network(d2, deficits))
        point_arcs = result.flows[: n_points * n_clusters].reshape(n_points, n_clusters)
        labels = np.argmax(point_arcs, axis=1)
        sizes = np.bincount(labels, minlength=n_clusters)
        assert (sizes >= tau).all()
        best = min(
            (sum(d2[i, c] for i, c in enumerate(combo))
             for combo in itertools.product(range(n_clusters), repeat=n_points)
             if np.bincount(combo, minlength=n_clusters).min() >= tau),
        )
        got = sum(d2[i, labels[i]] for i in range(n_points))
        assert abs(got - best) < 1e-9
        assert abs(result.total_cost - best) < 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    announce("mcf-correctness",
             f"100 constrained-assignment instances match enumeration within 1e-9 in {elapsed:.2f}s")


def test_css_kmeans_reduction_to_ss():
    rng = np.random.default_rng(102)
    X = rng.standard_normal((50, 4))
    gt = [0] * 8 + [3] * 8 + [None] * 34
    labeled = [True] * 16 + [False] * 34
    metas = [InstanceMeta(f"i{r}", r, gt_name_id=gt[r], labeled=labeled[r]) for r in range(50)]
    for seed in range(20):
        a = ss_kmeans(X, metas, ClusterConfig(n_clusters=4, seed=seed, restarts=3))
        b = css_kmeans(X, metas, ClusterConfig(n_clusters=4, seed=seed, restarts=3, min_size=0))
        assert np.array_equal(a.assignment, b.assignment)
        assert a.objective == b.objective
    announce("css-kmeans-reduction", "tau=0 assignments identical to SS-k-means on 20 seeded runs")


def _initial_voting(zv, names, labels):
    nn = zero_shot_assign(zv, names)
    winners = vote_cluster_names(labels, nn)
    return winners[labels]


def test_planted_truth_recovery():
    start = time.perf_counter()
    data = gen_planted(PlantedSpec(**RECOVERY_SPEC))
    zv = data.visual.data.astype(np.float64)
    names = data.names.data.astype(np.float64)
    assign = kmeans(zv, ClusterConfig(n_clusters=10, seed=0))
    res = refine_loop(zv, names, assign, NamingConfig(m=RECOVERY_M))
    s = sacc(res.instance_names, data.gt_name_ids)
    acc, _ = clustering_acc(res.instance_names, data.gt_name_ids)
    assert s == 1.0
    assert acc == 1.0

    # raised noise: 1-NN voting errs, refinement must not be worse
    noisy = gen_planted(PlantedSpec(**{**RECOVERY_SPEC, "noise": NOISY_SIGMA}))
    zv_n = noisy.visual.data.astype(np.float64)
    names_n = noisy.names.data.astype(np.float64)
    labels_n = kmeans(zv_n, ClusterConfig(n_clusters=10, seed=0)).assignment
    s_vote = sacc(_initial_voting(zv_n, names_n, labels_n), noisy.gt_name_ids)
    assert s_vote < 1.0
    res_n = refine_loop(zv_n, names_n, labels_n, NamingConfig(m=RECOVERY_M))
    s_refined = sacc(res_n.instance_names, noisy.gt_name_ids)
    assert s_refined >= s_vote
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    announce("planted-truth-recovery",
             f"sACC=1.00 ACC=1.00 at sigma=0.05; refined {s_refined:.3f} >= voting {s_vote:.3f} "
             f"at sigma={NOISY_SIGMA}; {elapsed:.1f}s")


def _iterative_voting(zv, names, labels, max_iter=50):
    """Refinement without Hungarian de-duplication (the '+ Iteration' rung)."""
    nn = zero_shot_assign(zv, names)
    inst = None
    n_clusters = int(labels.max()) + 1
    for _ in range(max_iter):
        winners = vote_cluster_names(labels, nn)
        clf = build_classifier(winners, names)
        new_labels = classify(zv, clf)
        new_inst = winners[new_labels]
        if inst is not None and np.array_equal(new_inst, inst):
            break
        inst = new_inst
        if np.bincount(new_labels, minlength=n_clusters).min() == 0:
            break
        labels = new_labels
    return inst


def test_ablation_ordering_on_noisy_data():
    wins_iter = wins_assign = 0
    means = np.zeros(3)
    for seed in ABLATION_SEEDS:
        data = gen_planted(PlantedSpec(**{**RECOVERY_SPEC, "noise": NOISY_SIGMA, "seed": seed}))
        zv = data.visual.data.astype(np.float64)
        names = data.names.data.astype(np.float64)
        gt = data.gt_name_ids
        labels = kmeans(zv, ClusterConfig(n_clusters=10, seed=0)).assignment
        s_vote = sacc(_initial_voting(zv, names, labels), gt)
        s_iter = sacc(_iterative_voting(zv, names, labels.copy()), gt)
        s_full = sacc(refine_loop(zv, names, labels, NamingConfig(m=RECOVERY_M)).instance_names, gt)
        wins_iter += s_iter >= s_vote
        wins_assign += s_full >= s_iter
        means += (s_vote, s_iter, s_full)
    means /= len(ABLATION_SEEDS)
    assert wins_iter >= 7
    assert wins_assign >= 7
    announce("ablation-ordering",
             f"voting<=iteration on {wins_iter}/10 seeds, iteration<=assignment on "
             f"{wins_assign}/10; means {means.round(3).tolist()}")


def test_metrics_oracles():
    rng = np.random.default_rng(103)

    def brute_force(pred, gt):
        pred_vals = sorted(set(pred))
        gt_vals = sorted(set(gt))
        best = 0
        if len(pred_vals) <= len(gt_vals):
            for perm in itertools.permutations(gt_vals, len(pred_vals)):
                mapping = dict(zip(pred_vals, perm))
                best = max(best, sum(1 for p, g in zip(pred, gt) if mapping[p] == g))
        else:
            for perm in itertools.permutations(pred_vals, len(gt_vals)):
                mapping = dict(zip(perm, gt_vals))
                best = max(best, sum(1 for p, g in zip(pred, gt) if mapping.get(p) == g))
        return best / len(pred)

    for _ in range(500):
        n = int(rng.integers(4, 25))
        pred = rng.integers(0, int(rng.integers(1, 7)), n)
        gt = rng.integers(0, int(rng.integers(1, 7)), n)
        score, _ = clustering_acc(pred, gt)
        assert abs(score - brute_force(pred.tolist(), gt.tolist())) < 1e-12

    text, lemma_map = gen_taxonomy_fixture(4, 2)
    fixture = Path(os.environ.get("TMPDIR", "/tmp")) / "scd_acceptance_tax.noun"
    fixture.write_text(text)
    graph = parse_wordnet_noun(fixture)
    lemmas = sorted(lemma_map)
    vocab = Vocabulary([VocabEntry(i, w, lemma_map[w]) for i, w in enumerate(lemmas)])
    for _ in range(50):
        n = int(rng.integers(2, 40))
        pred = rng.integers(0, len(lemmas), n)
        gt = rng.integers(0, len(lemmas), n)
        assert sacc(pred, gt) <= soft_sacc(pred, gt, graph, vocab) + 1e-12

    for _ in range(50):
        n = int(rng.integers(4, 40))
        pred = rng.integers(0, 5, n)
        gt = rng.integers(0, 5, n)
        old = rng.random(n) < 0.5
        acc_all, acc_old, acc_new, _ = split_acc(pred, gt, old)
        n_old, n_new = int(old.sum()), n - int(old.sum())
        lhs = round(acc_all * n)
        rhs = round((acc_old or 0.0) * n_old) + round((acc_new or 0.0) * n_new)
        assert lhs == rhs
    announce("metrics-oracles",
             "500 ACC enumerations exact; sacc<=soft_sacc on all draws; count identity exact")


def _heap_tree_path_len(i, j, branching):
    def depth_of(x):
        d = 0
        while x:
            x = (x - 1) // branching
            d += 1
        return d
    di, dj = depth_of(i), depth_of(j)
    steps = 0
    while di > dj:
        i = (i - 1) // branching
        di -= 1
        steps += 1
    while dj > di:
        j = (j - 1) // branching
        dj -= 1
        steps += 1
    while i != j:
        i = (i - 1) // branching
        j = (j - 1) // branching
        steps += 2
    return steps + 1


def test_taxonomy_closed_form_and_wordnet(tmp_path):
    for depth, branching in ((3, 2), (4, 2), (3, 3)):
        text, lemma_map = gen_taxonomy_fixture(depth, branching)
        p = tmp_path / f"tax_{depth}_{branching}.noun"
        p.write_text(text)
        graph = parse_wordnet_noun(p)
        assert graph.depth == depth
        n = len(lemma_map)
        offsets = {i: f"{i + 1:08d}" for i in range(n)}
        for i in range(n):
            for j in range(n):
                plen = _heap_tree_path_len(i, j, branching)
                expected = min(1.0, max(0.0, -math.log(plen / (2 * depth)) / math.log(2 * depth)))
                got = graph.lcs_similarity(offsets[i], offsets[j])
                assert abs(got - expected) < 1e-12

    candidates = [os.environ.get("SCD_WORDNET_DATA"),
                  "/usr/share/wordnet/data.noun",
                  "/root/data/wordnet/data.noun"]
    wn = next((c for c in candidates if c and Path(c).exists()), None)
    if wn is None:
        announce("taxonomy-closed-form",
                 "all b-ary fixture pairs within 1e-12; full WordNet data.noun not present, "
                 "parse check skipped")
        return
    start = time.perf_counter()
    graph = parse_wordnet_noun(wn)
    elapsed = time.perf_counter() - start
    assert elapsed < 20.0
    assert len(graph) == 82115
    entity = graph.resolve_lemma("entity")
    assert graph.shortest_path_len(entity, entity) == 1
    announce("taxonomy-closed-form",
             f"fixture pairs within 1e-12; WordNet parsed {len(graph)} synsets in {elapsed:.1f}s")


def test_pipeline_determinism_across_threads(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "planted", "--k", "10", "--n", "200", "--dim", "64",
                 "--per-class", "30", "--sigma", "0.05", "--seed", "7",
                 "--out", str(data)]) == 0
    manifests = []
    for threads, out in (("1", "t1"), ("8", "t8")):
        rc = main(["pipeline",
                   "--features", str(data / "visual.emb1"),
                   "--clip-visual", str(data / "visual.emb1"),
                   "--clip-names", str(data / "names.emb1"),
                   "--vocab", str(data / "vocab.jsonl"),
                   "--meta", str(data / "meta.jsonl"),
                   "--k", "10", "--m", str(RECOVERY_M),
                   "--threads", threads, "--out", str(tmp_path / out)])
        assert rc == 0
        manifests.append(json.loads((tmp_path / out / "manifest.json").read_text()))
    assert manifests[0]["artifacts"] == manifests[1]["artifacts"]
    report = json.loads((tmp_path / "t1" / "report.json").read_text())
    assert report["sacc"] == 1.0
    announce("pipeline-determinism",
             f"--threads 1 vs 8 produce identical hashes for "
             f"{len(manifests[0]['artifacts'])} artifacts")
