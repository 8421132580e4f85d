"""WordNet parsing, shortest paths, and Leacock-Chodorow scores."""
import math
from collections import deque

import numpy as np
import pytest

from scd.errors import CyclicTaxonomy, Disconnected, ParseError, UnknownLemma, UnknownSynset
from scd.synthgen import gen_taxonomy_fixture
from scd.taxonomy import TaxonomyGraph, load_taxonomy_tsv, parse_wordnet_noun

ENTITY_ANIMAL_DOG = """  1 fixture license line
00000001 03 n 01 entity 0 000 | top
00000002 03 n 01 animal 0 001 @ 00000001 n 0000 | creature
00000003 03 n 01 dog 0 001 @ 00000002 n 0000 | canine
"""


def write(tmp_path, text, name="data.noun"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_synset_chain(tmp_path):
    g = parse_wordnet_noun(write(tmp_path, ENTITY_ANIMAL_DOG))
    assert len(g) == 3
    assert g.depth == 3
    assert sum(len(g.parents(s)) for s in g.synsets) == 2
    assert g.roots == ["00000001"]


def test_pointer_to_nonexistent_offset(tmp_path):
    bad = ENTITY_ANIMAL_DOG + "00000004 03 n 01 cat 0 001 @ 00000099 n 0000 | missing\n"
    with pytest.raises(ParseError) as err:
        parse_wordnet_noun(write(tmp_path, bad))
    assert "00000099" in str(err.value)


def test_cycle_detection():
    with pytest.raises(CyclicTaxonomy) as err:
        TaxonomyGraph({"a": ["b"], "b": ["c"], "c": ["a"], "r": []})
    assert len(err.value.cycle) >= 3


def test_path_identity_and_siblings(binary_tree_graph):
    g, lemma_map = binary_tree_graph
    a = lemma_map["node_003"]
    b = lemma_map["node_004"]
    assert g.shortest_path_len(a, a) == 1
    assert g.shortest_path_len(a, b) == 3


def test_path_matches_bfs_oracle():
    rng = np.random.default_rng(0)
    # random 20-node DAG: node i points to a random earlier node
    parents = {"n00": []}
    for i in range(1, 20):
        parents[f"n{i:02d}"] = [f"n{int(rng.integers(0, i)):02d}"]
    g = TaxonomyGraph(parents)
    undirected = {s: set() for s in parents}
    for child, ps in parents.items():
        for p in ps:
            undirected[child].add(p)
            undirected[p].add(child)

    def bfs(a, b):
        dist = {a: 0}
        q = deque([a])
        while q:
            x = q.popleft()
            if x == b:
                return dist[x]
            for y in undirected[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        raise AssertionError("disconnected oracle")

    nodes = sorted(parents)
    for _ in range(40):
        a, b = rng.choice(nodes, 2)
        assert g.shortest_path_len(a, b) == bfs(a, b) + 1


def test_lcs_identical_is_one(binary_tree_graph):
    g, lemma_map = binary_tree_graph
    for lemma in ("node_000", "node_005"):
        s = lemma_map[lemma]
        assert g.lcs_similarity(s, s) == 1.0


def test_lcs_siblings_closed_form(binary_tree_graph):
    g, lemma_map = binary_tree_graph
    score = g.lcs_similarity(lemma_map["node_003"], lemma_map["node_004"])
    assert abs(score - math.log(2) / math.log(6)) < 1e-12
    assert abs(score - 0.3868528072345416) < 1e-10


def test_lcs_path_graph_extremes(tmp_path):
    # chain of 4: deepest pair scores exactly log2/log8 = 1/3
    text, lemma_map = gen_taxonomy_fixture(4, 1)
    g = parse_wordnet_noun(write(tmp_path, text))
    assert g.depth == 4
    score = g.lcs_similarity(lemma_map["node_000"], lemma_map["node_003"])
    assert abs(score - 1.0 / 3.0) < 1e-12


def test_lcs_symmetry_and_monotonicity(tmp_path):
    text, lemma_map = gen_taxonomy_fixture(4, 2)
    g = parse_wordnet_noun(write(tmp_path, text))
    nodes = sorted(lemma_map.values())
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.choice(nodes, 2)
        assert g.lcs_similarity(a, b) == g.lcs_similarity(b, a)
    # strictly decreasing in path length at fixed depth
    scores = {}
    for a in nodes:
        for b in nodes:
            p = g.shortest_path_len(a, b)
            scores.setdefault(p, g.lcs_similarity(a, b))
    ordered = sorted(scores)
    vals = [scores[p] for p in ordered]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_resolve_lemma(binary_tree_graph):
    g, lemma_map = binary_tree_graph
    assert g.resolve_lemma("node_002") == lemma_map["node_002"]
    assert g.resolve_lemma("anything", synset_id=lemma_map["node_001"]) == lemma_map["node_001"]
    with pytest.raises(UnknownLemma):
        g.resolve_lemma("absent")
    with pytest.raises(UnknownSynset):
        g.resolve_lemma("node_002", synset_id="99999999")


def test_resolve_polysemy_lowest_offset():
    g = TaxonomyGraph({"00000100": [], "00000200": ["00000100"]},
                      {"fox": ["00000200", "00000100"]})
    assert g.resolve_lemma("fox") == "00000100"


def test_multiple_roots_connected_via_virtual_root():
    g = TaxonomyGraph({"a": [], "b": [], "c": ["a"], "d": ["b"]})
    # c -> a -> *root* -> b -> d is 4 edges
    assert g.shortest_path_len("c", "d") == 5
    assert 0.0 <= g.lcs_similarity("c", "d") <= 1.0


def test_disconnected_without_virtual_root():
    g = TaxonomyGraph({"a": [], "b": [], "c": ["a"]}, connect_roots=False)
    with pytest.raises(Disconnected):
        g.shortest_path_len("c", "b")
    assert g.lcs_similarity("c", "b") == 0.0


def test_depth_excludes_virtual_root():
    g = TaxonomyGraph({"a": [], "b": ["a"], "c": [], "d": ["c"], "e": ["d"]})
    assert g.depth == 3


def test_license_block_skipped(tmp_path):
    licensed = "  05 some license text\n  more license\n" + ENTITY_ANIMAL_DOG
    g = parse_wordnet_noun(write(tmp_path, licensed))
    assert len(g) == 3


def test_lowercasing_preserves_underscores(tmp_path):
    text = ("00000001 03 n 01 entity 0 000 | top\n"
            "00000002 03 n 02 Great_Dane 0 dane 1 001 @ 00000001 n 0000 | dog\n")
    g = parse_wordnet_noun(write(tmp_path, text))
    assert g.resolve_lemma("great_dane") == "00000002"


def test_tsv_round_trip_isomorphic(tmp_path, binary_tree_graph):
    g, lemma_map = binary_tree_graph
    edges = tmp_path / "edges.tsv"
    lemmas = tmp_path / "lemmas.tsv"
    g.export_tsv(edges, lemmas)
    g2 = load_taxonomy_tsv(edges, lemmas)
    assert g2.synsets == g.synsets
    assert {s: sorted(g2.parents(s)) for s in g2.synsets} == \
           {s: sorted(g.parents(s)) for s in g.synsets}
    assert g2.depth == g.depth
    assert g2.lemma_index == g.lemma_index


def test_malformed_record(tmp_path):
    with pytest.raises(ParseError):
        parse_wordnet_noun(write(tmp_path, "00000001 03 n zz entity | broken\n"))
