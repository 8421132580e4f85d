"""On-disk containers: EMB1 embedding matrices, vocabulary and metadata JSONL.

The EMB1 container is magic bytes ``EMB1``, two little-endian u32 fields
(rows, dim), then rows*dim IEEE-754 float32 values, row-major, with no
padding and no trailing bytes. Loaders never auto-normalize; callers
normalize explicitly so raw features stay inspectable.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DuplicateLemma,
    InvalidHeader,
    MalformedLine,
    MetaValidationError,
    NonFiniteValue,
    TruncatedPayload,
    ZeroNormRow,
)

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")

# Tolerance for declaring a matrix row-normalized.
UNIT_NORM_ATOL = 1e-4


@dataclass
class EmbeddingMatrix:
    """Dense row-major float32 matrix of embedding vectors."""

    data: np.ndarray
    normalized: bool = False

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @classmethod
    def from_array(cls, arr, normalized: bool = False) -> "EmbeddingMatrix":
        data = np.ascontiguousarray(arr, dtype=np.float32)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidHeader(f"expected a rows x dim matrix with rows,dim >= 1, got shape {data.shape}")
        _check_finite(data)
        if normalized:
            norms = np.linalg.norm(data.astype(np.float64), axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_ATOL)
            if bad.size:
                raise ZeroNormRow(int(bad[0])) if norms[bad[0]] == 0.0 else InvalidHeader(
                    f"row {int(bad[0])} has norm {norms[bad[0]]:.6g}, not unit"
                )
        m = cls(data=data, normalized=normalized)
        m.data.setflags(write=False)
        return m


def _check_finite(data: np.ndarray) -> None:
    finite_rows = np.isfinite(data).all(axis=1)
    if not finite_rows.all():
        raise NonFiniteValue(int(np.argmin(finite_rows)))


def load_embeddings(path) -> EmbeddingMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: missing EMB1 magic")
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{path}: header truncated ({len(raw)} bytes)")
    _, rows, dim = _HEADER.unpack_from(raw)
    if rows < 1 or dim < 1:
        raise InvalidHeader(f"{path}: header declares rows={rows}, dim={dim}")
    expected = _HEADER.size + 4 * rows * dim
    if len(raw) != expected:
        kind = "truncated" if len(raw) < expected else "trailing bytes:"
        raise TruncatedPayload(f"{path}: {kind} expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dim)
    _check_finite(data)
    m = EmbeddingMatrix(data=data, normalized=False)
    m.data.setflags(write=False)
    return m


def save_embeddings(m: EmbeddingMatrix, path) -> None:
    data = np.ascontiguousarray(m.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, m.rows, m.dim))
        f.write(data.tobytes())


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm (norms computed in float64)."""
    norms = np.linalg.norm(m.data.astype(np.float64), axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormRow(int(zero[0]))
    data = (m.data / norms[:, None]).astype(np.float32)
    out = EmbeddingMatrix(data=data, normalized=True)
    out.data.setflags(write=False)
    return out


# ------------------------------------------------------------------ JSONL IO

@dataclass(frozen=True)
class VocabEntry:
    name_id: int
    lemma: str
    synset_id: str | None = None


@dataclass
class Vocabulary:
    """Ordered name dictionary; name_id equals position, lemmas are unique."""

    entries: list[VocabEntry]

    def __post_init__(self):
        self._by_lemma = {}
        for e in self.entries:
            if e.lemma in self._by_lemma:
                raise DuplicateLemma(e.lemma)
            self._by_lemma[e.lemma] = e.name_id
        if len(self.entries) < 1:
            raise MetaValidationError("vocabulary is empty")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name_id: int) -> VocabEntry:
        return self.entries[name_id]

    def lemma(self, name_id: int) -> str:
        return self.entries[name_id].lemma

    def id_of(self, lemma: str) -> int:
        return self._by_lemma[lemma]

    def __contains__(self, lemma: str) -> bool:
        return lemma in self._by_lemma


@dataclass(frozen=True)
class InstanceMeta:
    instance_id: str
    row: int
    gt_name_id: int | None = None
    labeled: bool = False


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedLine(line_no, f"invalid JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise MalformedLine(line_no, "record is not an object")
            yield line_no, rec


def load_vocabulary(path) -> Vocabulary:
    entries = []
    seen = {}
    for line_no, rec in _iter_jsonl(path):
        lemma = rec.get("lemma")
        if not isinstance(lemma, str) or not lemma:
            raise MalformedLine(line_no, "missing or non-string 'lemma'")
        synset_id = rec.get("synset_id")
        if synset_id is not None and not isinstance(synset_id, str):
            raise MalformedLine(line_no, "'synset_id' must be a string or null")
        if lemma in seen:
            raise DuplicateLemma(lemma, line_no)
        seen[lemma] = line_no
        entries.append(VocabEntry(name_id=len(entries), lemma=lemma, synset_id=synset_id))
    return Vocabulary(entries=entries)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in vocab.entries:
            f.write(json.dumps({"lemma": e.lemma, "synset_id": e.synset_id}) + "\n")


def load_meta(path) -> list[InstanceMeta]:
    metas = []
    for line_no, rec in _iter_jsonl(path):
        try:
            instance_id = rec["instance_id"]
            row = rec["row"]
            gt = rec.get("gt_name_id")
            labeled = rec.get("labeled", False)
        except KeyError as e:
            raise MalformedLine(line_no, f"missing key {e.args[0]!r}") from None
        if not isinstance(instance_id, str):
            raise MalformedLine(line_no, "'instance_id' must be a string")
        if not isinstance(row, int) or isinstance(row, bool) or row < 0:
            raise MalformedLine(line_no, "'row' must be a non-negative integer")
        if gt is not None and (not isinstance(gt, int) or isinstance(gt, bool) or gt < 0):
            raise MalformedLine(line_no, "'gt_name_id' must be a non-negative integer or null")
        if not isinstance(labeled, bool):
            raise MalformedLine(line_no, "'labeled' must be a boolean")
        if labeled and gt is None:
            raise MetaValidationError(f"line {line_no}: labeled instance {instance_id!r} lacks gt_name_id")
        metas.append(InstanceMeta(instance_id=instance_id, row=row, gt_name_id=gt, labeled=labeled))
    return metas


def save_meta(metas: list[InstanceMeta], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in metas:
            f.write(json.dumps({
                "instance_id": m.instance_id,
                "row": m.row,
                "gt_name_id": m.gt_name_id,
                "labeled": m.labeled,
            }) + "\n")


def validate_meta(metas: list[InstanceMeta], n_rows: int | None = None,
                  vocab_size: int | None = None) -> None:
    """Check that rows form a bijection onto [0, n_rows) and gt ids are in range."""
    rows = [m.row for m in metas]
    if len(set(rows)) != len(rows):
        dup = next(r for r in rows if rows.count(r) > 1)
        raise MetaValidationError(f"duplicate row index {dup}")
    if n_rows is not None:
        if len(metas) != n_rows:
            raise MetaValidationError(f"{len(metas)} meta records for a {n_rows}-row matrix")
        if rows and (min(rows) != 0 or max(rows) != n_rows - 1):
            bad = max(rows) if max(rows) >= n_rows else min(rows)
            raise MetaValidationError(f"row index {bad} outside [0, {n_rows})")
    if vocab_size is not None:
        for m in metas:
            if m.gt_name_id is not None and m.gt_name_id >= vocab_size:
                raise MetaValidationError(
                    f"instance {m.instance_id!r} references name_id {m.gt_name_id} "
                    f"but the vocabulary has {vocab_size} entries")
