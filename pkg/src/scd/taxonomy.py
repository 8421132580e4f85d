"""Hypernym taxonomy: WordNet data.noun parsing, shortest paths, and the
normalized Leacock-Chodorow similarity used for soft name accuracy.

Path length convention: p = undirected edge count + 1, so p(a, a) = 1 and
the log in the similarity never diverges. Natural log throughout; the
normalized score divides by the maximum -log(1/(2d)) and is clamped to
[0, 1]. Multiple roots are joined under a virtual super-root so any pair in
a valid file is connected.
"""
from __future__ import annotations

import math
import threading
from collections import deque

from .errors import CyclicTaxonomy, Disconnected, ParseError, UnknownLemma, UnknownSynset

VIRTUAL_ROOT = "*root*"
_MEMO_MAX = 1 << 16

HYPERNYM_SYMBOLS = ("@", "@i")


class TaxonomyGraph:
    """Immutable hypernym DAG over synsets with a lemma index."""

    def __init__(self, parents: dict[str, list[str]],
                 lemma_index: dict[str, list[str]] | None = None,
                 connect_roots: bool = True):
        self._parents = {s: list(ps) for s, ps in parents.items()}
        for s, ps in self._parents.items():
            for p in ps:
                if p not in self._parents:
                    raise ParseError(0, f"synset {s} points to unknown hypernym {p}")
        self._children: dict[str, list[str]] = {s: [] for s in self._parents}
        for s, ps in self._parents.items():
            for p in ps:
                self._children[p].append(s)
        self.roots = sorted(s for s, ps in self._parents.items() if not ps)
        self._connect_roots = connect_roots and len(self.roots) > 1
        self._up = self._check_acyclic_and_depths()
        self.depth = 1 + (max(self._up.values()) if self._up else 0)
        self.lemma_index = {}
        for lemma, synsets in (lemma_index or {}).items():
            ordered = sorted(synsets)
            for s in ordered:
                if s not in self._parents:
                    raise ParseError(0, f"lemma {lemma!r} maps to unknown synset {s}")
            self.lemma_index[lemma] = ordered
        self._memo: dict[tuple[str, str], int] = {}
        self._memo_lock = threading.Lock()

    def _check_acyclic_and_depths(self) -> dict[str, int]:
        # Kahn from the roots down; leftovers witness a cycle.
        remaining = {s: len(ps) for s, ps in self._parents.items()}
        up = {s: 0 for s in self.roots}
        queue = deque(self.roots)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for child in self._children[node]:
                up[child] = max(up.get(child, 0), up[node] + 1)
                remaining[child] -= 1
                if remaining[child] == 0:
                    queue.append(child)
        if seen != len(self._parents):
            stuck = next(s for s in sorted(self._parents) if remaining[s] > 0)
            cycle = [stuck]
            node = stuck
            while True:
                node = next(p for p in self._parents[node] if remaining[p] > 0)
                cycle.append(node)
                if node == stuck or node in cycle[:-1]:
                    break
            raise CyclicTaxonomy(cycle)
        return up

    def __contains__(self, synset_id: str) -> bool:
        return synset_id in self._parents

    def __len__(self) -> int:
        return len(self._parents)

    @property
    def synsets(self) -> list[str]:
        return sorted(self._parents)

    def parents(self, synset_id: str) -> list[str]:
        return list(self._parents[synset_id])

    def _neighbors(self, node: str):
        if node == VIRTUAL_ROOT:
            return self.roots
        out = self._parents[node] + self._children[node]
        if self._connect_roots and not self._parents[node]:
            out = out + [VIRTUAL_ROOT]
        return out

    def shortest_path_len(self, a: str, b: str) -> int:
        """Undirected shortest path edge count + 1; p(a, a) = 1."""
        for s in (a, b):
            if s not in self._parents:
                raise UnknownSynset(s)
        if a == b:
            return 1
        key = (a, b) if a <= b else (b, a)
        with self._memo_lock:
            cached = self._memo.get(key)
        if cached is not None:
            return cached
        dist = {a: 0}
        queue = deque([a])
        found = None
        while queue:
            node = queue.popleft()
            for nxt in self._neighbors(node):
                if nxt in dist:
                    continue
                dist[nxt] = dist[node] + 1
                if nxt == b:
                    found = dist[nxt]
                    queue.clear()
                    break
                queue.append(nxt)
        if found is None:
            raise Disconnected(f"no path between {a} and {b}")
        p = found + 1
        with self._memo_lock:
            if len(self._memo) >= _MEMO_MAX:
                self._memo.pop(next(iter(self._memo)))
            self._memo[key] = p
        return p

    def lcs_similarity(self, a: str, b: str) -> float:
        """Normalized -log(p / 2d); 1.0 for identical synsets, 0.0 when disconnected."""
        try:
            p = self.shortest_path_len(a, b)
        except Disconnected:
            return 0.0
        raw = -math.log(p / (2.0 * self.depth))
        peak = math.log(2.0 * self.depth)
        return min(1.0, max(0.0, raw / peak))

    def resolve_lemma(self, lemma: str, synset_id: str | None = None) -> str:
        if synset_id is not None:
            if synset_id not in self._parents:
                raise UnknownSynset(synset_id)
            return synset_id
        synsets = self.lemma_index.get(lemma)
        if not synsets:
            raise UnknownLemma(lemma)
        return synsets[0]

    def export_tsv(self, edges_path, lemma_path=None) -> None:
        with open(edges_path, "w", encoding="utf-8") as f:
            for child in sorted(self._parents):
                for parent in sorted(self._parents[child]):
                    f.write(f"{child}\t{parent}\n")
        if lemma_path is not None:
            with open(lemma_path, "w", encoding="utf-8") as f:
                for lemma in sorted(self.lemma_index):
                    for s in self.lemma_index[lemma]:
                        f.write(f"{lemma}\t{s}\n")


def parse_wordnet_noun(path, connect_roots: bool = True) -> TaxonomyGraph:
    """Parse a WordNet 3.x ``data.noun`` file into a TaxonomyGraph.

    License-block lines (leading two spaces) are skipped; lemmas are
    lowercased with underscores preserved; ``@`` and ``@i`` pointers to noun
    synsets become hypernym edges.
    """
    parents: dict[str, list[str]] = {}
    lemma_index: dict[str, list[str]] = {}
    pending: list[tuple[int, str, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if line.startswith("  ") or not line.strip():
                continue
            data = line.partition("|")[0]
            fields = data.split()
            try:
                offset = fields[0]
                ss_type = fields[2]
                if ss_type != "n":
                    raise ParseError(line_no, f"ss_type {ss_type!r} is not a noun")
                w_cnt = int(fields[3], 16)
                words = [fields[4 + 2 * k] for k in range(w_cnt)]
                base = 4 + 2 * w_cnt
                p_cnt = int(fields[base])
                hypernyms = []
                for k in range(p_cnt):
                    sym = fields[base + 1 + 4 * k]
                    target = fields[base + 2 + 4 * k]
                    pos = fields[base + 3 + 4 * k]
                    if sym in HYPERNYM_SYMBOLS and pos == "n":
                        hypernyms.append(target)
            except ParseError:
                raise
            except (IndexError, ValueError) as e:
                raise ParseError(line_no, f"malformed synset record ({e})") from None
            if offset in parents:
                raise ParseError(line_no, f"duplicate synset offset {offset}")
            parents[offset] = hypernyms
            for target in hypernyms:
                pending.append((line_no, offset, target))
            for word in words:
                lemma_index.setdefault(word.lower(), []).append(offset)
    if not parents:
        raise ParseError(0, "no synsets found")
    for line_no, offset, target in pending:
        if target not in parents:
            raise ParseError(line_no, f"synset {offset} points to nonexistent offset {target}")
    return TaxonomyGraph(parents, lemma_index, connect_roots=connect_roots)


def load_taxonomy_tsv(edges_path, lemma_path=None, connect_roots: bool = True) -> TaxonomyGraph:
    """Graph from a child<TAB>parent edge list plus optional lemma map."""
    parents: dict[str, list[str]] = {}
    with open(edges_path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(line_no, "expected child<TAB>parent")
            child, parent = parts
            parents.setdefault(child, []).append(parent)
            parents.setdefault(parent, [])
    lemma_index: dict[str, list[str]] = {}
    if lemma_path is not None:
        with open(lemma_path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise ParseError(line_no, "expected lemma<TAB>synset_id")
                lemma_index.setdefault(parts[0], []).append(parts[1])
    return TaxonomyGraph(parents, lemma_index, connect_roots=connect_roots)


def shortest_path_len(graph: TaxonomyGraph, a: str, b: str) -> int:
    return graph.shortest_path_len(a, b)


def lcs_similarity(graph: TaxonomyGraph, a: str, b: str) -> float:
    return graph.lcs_similarity(a, b)


def resolve_lemma(graph: TaxonomyGraph, lemma: str, synset_id: str | None = None) -> str:
    return graph.resolve_lemma(lemma, synset_id)
