"""Deterministic planted-truth datasets and taxonomy fixtures.

Every draw comes from one numpy PCG64 generator seeded from the spec, in a
fixed order, so identical specs produce byte-identical containers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .store import (
    EmbeddingMatrix,
    InstanceMeta,
    VocabEntry,
    Vocabulary,
    save_embeddings,
    save_meta,
    save_vocabulary,
)


@dataclass
class PlantedSpec:
    n_classes: int
    vocab_size: int
    dim: int
    per_class: int
    noise: float = 0.0
    labeled_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.n_classes > self.vocab_size:
            raise ValueError("need 1 <= n_classes <= vocab_size")
        if self.dim < 1 or self.per_class < 1:
            raise ValueError("dim and per_class must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if not 0.0 <= self.labeled_frac <= 1.0:
            raise ValueError("labeled_frac must be in [0, 1]")


@dataclass
class PlantedDataset:
    visual: EmbeddingMatrix
    names: EmbeddingMatrix
    vocab: Vocabulary
    meta: list[InstanceMeta]
    true_name_ids: np.ndarray
    labeled_classes: list[int]

    @property
    def gt_name_ids(self) -> np.ndarray:
        return np.array([m.gt_name_id for m in sorted(self.meta, key=lambda x: x.row)],
                        dtype=np.int64)


def _unit_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    return arr / norms


def gen_planted(spec: PlantedSpec) -> PlantedDataset:
    """Plant n_classes of the vocab_size name embeddings and scatter noisy
    image copies around them; the first ceil(K/2) classes carry labels when
    labeled_frac > 0."""
    rng = np.random.default_rng(spec.seed)
    name_vecs = _unit_rows(rng.standard_normal((spec.vocab_size, spec.dim)))
    true_ids = np.sort(rng.choice(spec.vocab_size, size=spec.n_classes, replace=False))

    blocks = []
    for k in range(spec.n_classes):
        noise = rng.standard_normal((spec.per_class, spec.dim))
        block = name_vecs[true_ids[k]][None, :] + spec.noise * noise
        blocks.append(_unit_rows(block))
    visual = np.vstack(blocks).astype(np.float32)
    names = name_vecs.astype(np.float32)

    n_labeled_classes = (spec.n_classes + 1) // 2 if spec.labeled_frac > 0 else 0
    labeled_classes = list(range(n_labeled_classes))
    labeled_per_class = int(spec.labeled_frac * spec.per_class)

    metas = []
    row = 0
    for k in range(spec.n_classes):
        for j in range(spec.per_class):
            labeled = k in labeled_classes and j < labeled_per_class
            metas.append(InstanceMeta(
                instance_id=f"img_{row:05d}",
                row=row,
                gt_name_id=int(true_ids[k]),
                labeled=labeled,
            ))
            row += 1

    vocab = Vocabulary(entries=[
        VocabEntry(name_id=j, lemma=f"name_{j:04d}", synset_id=None)
        for j in range(spec.vocab_size)
    ])
    return PlantedDataset(
        visual=EmbeddingMatrix.from_array(visual, normalized=True),
        names=EmbeddingMatrix.from_array(names, normalized=True),
        vocab=vocab,
        meta=metas,
        true_name_ids=true_ids,
        labeled_classes=labeled_classes,
    )


def write_planted(data: PlantedDataset, out_dir) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "visual": str(out / "visual.emb1"),
        "names": str(out / "names.emb1"),
        "vocab": str(out / "vocab.jsonl"),
        "meta": str(out / "meta.jsonl"),
        "truth": str(out / "truth.json"),
    }
    save_embeddings(data.visual, paths["visual"])
    save_embeddings(data.names, paths["names"])
    save_vocabulary(data.vocab, paths["vocab"])
    save_meta(data.meta, paths["meta"])
    with open(paths["truth"], "w", encoding="utf-8") as f:
        json.dump({
            "true_name_ids": [int(x) for x in data.true_name_ids],
            "labeled_classes": data.labeled_classes,
        }, f, indent=2, sort_keys=True)
        f.write("\n")
    return paths


def gen_taxonomy_fixture(depth: int, branching: int) -> tuple[str, dict[str, str]]:
    """Complete b-ary hypernym tree in data.noun syntax plus its lemma map.

    Nodes are heap-indexed (children of i are b*i+1 .. b*i+b) so closed-form
    path lengths are available to tests. Returns (file text, lemma -> synset).
    """
    if depth < 1 or branching < 1:
        raise ValueError("depth and branching must be >= 1")
    n_nodes = depth if branching == 1 else (branching ** depth - 1) // (branching - 1)

    def offset(i: int) -> str:
        return f"{i + 1:08d}"

    lines = [
        "  1 synthetic taxonomy fixture",
        "  2 lines with two leading spaces mimic the license block",
    ]
    lemma_map = {}
    for i in range(n_nodes):
        lemma = f"node_{i:03d}"
        lemma_map[lemma] = offset(i)
        if i == 0:
            ptrs = "000"
        else:
            parent = (i - 1) // branching
            ptrs = f"001 @ {offset(parent)} n 0000"
        lines.append(f"{offset(i)} 03 n 01 {lemma} 0 {ptrs} | synthetic node {i}")
    return "\n".join(lines) + "\n", lemma_map


def write_taxonomy_fixture(depth: int, branching: int, out_dir) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text, lemma_map = gen_taxonomy_fixture(depth, branching)
    paths = {"data_noun": str(out / "data.noun"), "lemmas": str(out / "lemmas.tsv")}
    Path(paths["data_noun"]).write_text(text, encoding="utf-8")
    with open(paths["lemmas"], "w", encoding="utf-8") as f:
        for lemma in sorted(lemma_map):
            f.write(f"{lemma}\t{lemma_map[lemma]}\n")
    return paths
