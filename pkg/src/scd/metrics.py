"""Evaluation measures: semantic accuracy, taxonomy-softened accuracy,
Hungarian clustering accuracy with Old/New splits, and name-set IoU."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ModelPredictsTooManyClasses, UnknownLemma
from .solvers import hungarian
from .store import Vocabulary
from .taxonomy import TaxonomyGraph

#: Refuse to Hungarian-match predictions with more unique labels than this.
MAX_PRED_CLASSES = 2000


def _as_int_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    return arr


def _check_lengths(pred, gt):
    if pred.shape[0] != gt.shape[0]:
        raise LengthMismatch(f"{pred.shape[0]} predictions vs {gt.shape[0]} ground truths")
    if pred.shape[0] == 0:
        raise LengthMismatch("nothing to evaluate")


def sacc(pred, gt) -> float:
    """Fraction of instances whose predicted name exactly matches the truth."""
    pred = _as_int_array(pred, "pred")
    gt = _as_int_array(gt, "gt")
    _check_lengths(pred, gt)
    return float((pred == gt).mean())


def soft_sacc(pred, gt, graph: TaxonomyGraph, vocab: Vocabulary,
              unknown_scores_zero: bool = False) -> float:
    """Mean Leacock-Chodorow similarity between predicted and true names.

    Names resolve through the vocabulary's synset_id when present, else the
    lemma's lowest-offset synset. Unknown lemmas raise unless
    unknown_scores_zero is set, in which case those instances score 0.
    """
    pred = _as_int_array(pred, "pred")
    gt = _as_int_array(gt, "gt")
    _check_lengths(pred, gt)

    resolved: dict[int, str | None] = {}

    def resolve(name_id: int):
        if name_id not in resolved:
            entry = vocab[name_id]
            try:
                resolved[name_id] = graph.resolve_lemma(entry.lemma, entry.synset_id)
            except UnknownLemma:
                if not unknown_scores_zero:
                    raise
                resolved[name_id] = None
        return resolved[name_id]

    pair_scores: dict[tuple[int, int], float] = {}
    total = 0.0
    for p, g in zip(pred.tolist(), gt.tolist()):
        key = (p, g)
        if key not in pair_scores:
            sp, sg = resolve(p), resolve(g)
            pair_scores[key] = 0.0 if sp is None or sg is None else graph.lcs_similarity(sp, sg)
        total += pair_scores[key]
    return total / pred.shape[0]


def _contingency(pred, gt):
    pred_vals, pred_inv = np.unique(pred, return_inverse=True)
    gt_vals, gt_inv = np.unique(gt, return_inverse=True)
    table = np.zeros((gt_vals.size, pred_vals.size), dtype=np.int64)
    np.add.at(table, (gt_inv, pred_inv), 1)
    return table, gt_vals, pred_vals, gt_inv, pred_inv


def _best_mapping(pred, gt, max_classes):
    table, gt_vals, pred_vals, _, _ = _contingency(pred, gt)
    if pred_vals.size > max_classes:
        raise ModelPredictsTooManyClasses(
            f"{pred_vals.size} unique predicted labels exceed the limit of {max_classes}")
    neg = -table.astype(np.float64)
    if table.shape[0] <= table.shape[1]:
        rows_to_cols, _ = hungarian(neg)
        pairs = [(int(r), int(c)) for r, c in enumerate(rows_to_cols)]
    else:
        cols_to_rows, _ = hungarian(neg.T)
        pairs = [(int(r), int(c)) for c, r in enumerate(cols_to_rows)]
    mapping = {int(pred_vals[c]): int(gt_vals[r]) for r, c in pairs}
    return mapping


def clustering_acc(pred, gt, max_classes: int = MAX_PRED_CLASSES):
    """Accuracy under the best one-to-one matching of predicted labels to
    ground-truth classes (rectangular label sets are matched partially)."""
    pred = _as_int_array(pred, "pred")
    gt = _as_int_array(gt, "gt")
    _check_lengths(pred, gt)
    mapping = _best_mapping(pred, gt, max_classes)
    matched = sum(1 for p, g in zip(pred.tolist(), gt.tolist()) if mapping.get(p) == g)
    return matched / pred.shape[0], mapping


def split_acc(pred, gt, old_mask, max_classes: int = MAX_PRED_CLASSES):
    """One Hungarian over all instances, then per-subset accuracy under that
    single mapping. Returns (acc_all, acc_old, acc_new, mapping); an empty
    subset reports None."""
    pred = _as_int_array(pred, "pred")
    gt = _as_int_array(gt, "gt")
    _check_lengths(pred, gt)
    old_mask = np.asarray(old_mask, dtype=bool)
    if old_mask.shape[0] != pred.shape[0]:
        raise LengthMismatch("old_mask length differs from predictions")
    mapping = _best_mapping(pred, gt, max_classes)
    hit = np.fromiter((mapping.get(p) == g for p, g in zip(pred.tolist(), gt.tolist())),
                      dtype=bool, count=pred.shape[0])
    acc_all = float(hit.mean())
    acc_old = float(hit[old_mask].mean()) if old_mask.any() else None
    acc_new = float(hit[~old_mask].mean()) if (~old_mask).any() else None
    return acc_all, acc_old, acc_new, mapping


def name_set_iou(pred_names, gt_names) -> float:
    """|intersection| / |union| of the two name sets; empty vs empty is 1.0."""
    pred_set, gt_set = set(pred_names), set(gt_names)
    union = pred_set | gt_set
    if not union:
        return 1.0
    return len(pred_set & gt_set) / len(union)


@dataclass
class EvalReport:
    sacc: float
    soft_sacc: float | None
    acc_all: float | None
    acc_old: float | None
    acc_new: float | None
    name_iou: float
    n_instances: int
    n_old: int
    n_new: int
    permutation: dict[int, int] = field(default_factory=dict)
    class_counts: dict[int, int] = field(default_factory=dict)
    acc_skipped_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "sacc": self.sacc,
            "soft_sacc": self.soft_sacc,
            "acc_all": self.acc_all,
            "acc_old": self.acc_old,
            "acc_new": self.acc_new,
            "name_iou": self.name_iou,
            "n_instances": self.n_instances,
            "n_old": self.n_old,
            "n_new": self.n_new,
            "permutation": {str(k): v for k, v in sorted(self.permutation.items())},
            "class_counts": {str(k): v for k, v in sorted(self.class_counts.items())},
            "acc_skipped_reason": self.acc_skipped_reason,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        def cell(v):
            return f"{100.0 * v:6.1f}" if v is not None else "     -"

        lines = [
            f"{'metric':<12}{'All':>8}{'Old':>8}{'New':>8}",
            f"{'sACC':<12}{cell(self.sacc):>8}{'-':>8}{'-':>8}",
            f"{'Soft-sACC':<12}{cell(self.soft_sacc):>8}{'-':>8}{'-':>8}",
            f"{'ACC':<12}{cell(self.acc_all):>8}{cell(self.acc_old):>8}{cell(self.acc_new):>8}",
            f"{'Name IoU':<12}{cell(self.name_iou):>8}{'-':>8}{'-':>8}",
        ]
        return "\n".join(lines)


def evaluate(pred, gt, *, old_mask=None, graph: TaxonomyGraph | None = None,
             vocab: Vocabulary | None = None, pred_name_set=None,
             max_classes: int = MAX_PRED_CLASSES,
             unknown_scores_zero: bool = False) -> EvalReport:
    """Full report over one prediction vector.

    ACC is computed by treating predicted names as cluster labels; when the
    prediction has too many unique labels the ACC block is reported absent
    with a reason instead of failing the whole report.
    """
    pred = _as_int_array(pred, "pred")
    gt = _as_int_array(gt, "gt")
    _check_lengths(pred, gt)
    if old_mask is None:
        old_mask = np.zeros(pred.shape[0], dtype=bool)
    else:
        old_mask = np.asarray(old_mask, dtype=bool)

    s = sacc(pred, gt)
    soft = None
    if graph is not None:
        if vocab is None:
            raise ValueError("soft_sacc needs the vocabulary alongside the taxonomy")
        soft = soft_sacc(pred, gt, graph, vocab, unknown_scores_zero=unknown_scores_zero)

    acc_all = acc_old = acc_new = None
    mapping: dict[int, int] = {}
    skipped = None
    try:
        acc_all, acc_old, acc_new, mapping = split_acc(pred, gt, old_mask, max_classes=max_classes)
    except ModelPredictsTooManyClasses as e:
        skipped = str(e)

    iou_pred = pred_name_set if pred_name_set is not None else set(pred.tolist())
    iou = name_set_iou(iou_pred, set(gt.tolist()))

    gt_vals, gt_counts = np.unique(gt, return_counts=True)
    return EvalReport(
        sacc=s, soft_sacc=soft,
        acc_all=acc_all, acc_old=acc_old, acc_new=acc_new,
        name_iou=iou,
        n_instances=int(pred.shape[0]),
        n_old=int(old_mask.sum()), n_new=int((~old_mask).sum()),
        permutation=mapping,
        class_counts={int(v): int(c) for v, c in zip(gt_vals, gt_counts)},
        acc_skipped_reason=skipped,
    )
