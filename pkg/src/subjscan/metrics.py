"""Scoring: confusion matrix, per-class P/R/F1, macro-F1, accuracy, reports.

Zero-denominator convention: precision, recall, and F1 are all 0 when
their denominator is 0. File-level scoring aligns prediction and gold
rows by sentence_id and fails loudly on any mismatch.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import BadLabel, DuplicateId, Label, MissingColumn
from .errors import DataError


class LengthMismatch(DataError):
    pass


class IdMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts with SUBJ as the positive class."""

    tp_subj: int
    fp_subj: int
    fn_subj: int
    tn_subj: int

    @property
    def total(self) -> int:
        return self.tp_subj + self.fp_subj + self.fn_subj + self.tn_subj


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    n: int
    subj: ClassScores
    obj: ClassScores
    macro_f1: float
    accuracy: float
    baseline_f1: Optional[float] = None
    delta: Optional[float] = None
    above_baseline: Optional[bool] = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(preds: Sequence[Label], golds: Sequence[Label]) -> ConfusionMatrix:
    """Tabulate aligned prediction/gold label pairs."""
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise EmptyInput("nothing to score")
    tp = fp = fn = tn = 0
    for p, g in zip(preds, golds):
        if g is Label.SUBJ:
            if p is Label.SUBJ:
                tp += 1
            else:
                fn += 1
        else:
            if p is Label.SUBJ:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp_subj=tp, fp_subj=fp, fn_subj=fn, tn_subj=tn)


def _prf(tp: int, fp: int, fn: int) -> ClassScores:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassScores(precision=precision, recall=recall, f1=f1)


def subj_scores(cm: ConfusionMatrix) -> ClassScores:
    return _prf(cm.tp_subj, cm.fp_subj, cm.fn_subj)


def obj_scores(cm: ConfusionMatrix) -> ClassScores:
    # OBJ as positive class: its false positives are SUBJ misses and vice versa.
    return _prf(cm.tn_subj, cm.fn_subj, cm.fp_subj)


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the SUBJ and OBJ F1 scores."""
    return (subj_scores(cm).f1 + obj_scores(cm).f1) / 2.0


def accuracy(cm: ConfusionMatrix) -> float:
    return (cm.tp_subj + cm.tn_subj) / cm.total


def align_by_id(
    preds: Mapping[str, Label],
    golds: Mapping[str, Label],
) -> tuple[list[Label], list[Label]]:
    """Pair predictions with golds by sentence_id, in gold order."""
    missing = [sid for sid in golds if sid not in preds]
    extra = [sid for sid in preds if sid not in golds]
    if missing or extra:
        raise IdMismatch(
            f"prediction/gold ids differ (missing {len(missing)}, unexpected {len(extra)}; "
            f"e.g. {(missing + extra)[:3]})"
        )
    ordered = list(golds)
    return [preds[sid] for sid in ordered], [golds[sid] for sid in ordered]


def read_label_file(path: str | Path) -> dict[str, Label]:
    """Read sentence_id -> label pairs from a TSV, in file order.

    Accepts both the full corpus format and the two-column predictions
    format; only the sentence_id and label columns are consulted.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MissingColumn(f"{path}: file is empty, expected a header row")
    header = lines[0].split("\t")
    try:
        id_col = header.index("sentence_id")
        label_col = header.index("label")
    except ValueError as exc:
        raise MissingColumn(f"{path}: header must name sentence_id and label columns") from exc
    labels: dict[str, Label] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        fields = raw.split("\t")
        if len(fields) <= max(id_col, label_col):
            raise DataError(f"{path}:{lineno}: too few columns")
        sid = fields[id_col]
        if sid in labels:
            raise DuplicateId(f"{path}:{lineno}: duplicate sentence_id {sid!r}")
        try:
            labels[sid] = Label(fields[label_col])
        except ValueError:
            raise BadLabel(f"{path}:{lineno}: label {fields[label_col]!r} not in (SUBJ, OBJ)") from None
    if not labels:
        raise EmptyInput(f"{path}: no labeled rows")
    return labels


def report(
    preds: Sequence[Label],
    golds: Sequence[Label],
    baseline_f1: Optional[float] = None,
    metadata: Optional[dict] = None,
) -> EvalReport:
    """Score aligned labels into a full EvalReport."""
    cm = confusion(preds, golds)
    subj = subj_scores(cm)
    obj = obj_scores(cm)
    macro = (subj.f1 + obj.f1) / 2.0
    rep = EvalReport(
        n=cm.total,
        subj=subj,
        obj=obj,
        macro_f1=macro,
        accuracy=accuracy(cm),
        metadata=dict(metadata or {}),
    )
    if baseline_f1 is not None:
        rep.baseline_f1 = baseline_f1
        rep.delta = macro - baseline_f1
        rep.above_baseline = macro > baseline_f1
    return rep


def render_text(rep: EvalReport) -> str:
    """Aligned plain-text table; scores above the baseline carry a ``*``."""
    mark = " *" if rep.above_baseline else ""
    lines = [
        f"{'class':<8}{'precision':>10}{'recall':>10}{'F1':>10}",
        f"{'SUBJ':<8}{rep.subj.precision:>10.4f}{rep.subj.recall:>10.4f}{rep.subj.f1:>10.4f}",
        f"{'OBJ':<8}{rep.obj.precision:>10.4f}{rep.obj.recall:>10.4f}{rep.obj.f1:>10.4f}",
        "",
        f"macro-F1  {rep.macro_f1:.4f}{mark}",
        f"accuracy  {rep.accuracy:.4f}",
        f"n         {rep.n}",
    ]
    if rep.baseline_f1 is not None:
        lines.append(f"baseline  {rep.baseline_f1:.4f}   delta {rep.delta:+.4f}")
        if rep.above_baseline:
            lines.append("* above baseline")
    return "\n".join(lines)
