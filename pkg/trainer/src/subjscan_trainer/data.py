"""TSV reading and batching for the trainer.

The file format mirrors the pipeline's interchange TSV
(``sentence_id<TAB>sentence<TAB>label`` with a header); the class index
order is fixed as [OBJ, SUBJ] to match the logits JSONL contract.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

LABELS = ("OBJ", "SUBJ")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    sentence_id: str
    text: str
    label: Optional[int]  # index into LABELS, None when unlabeled


def read_tsv(path: str | Path, require_labels: bool = True) -> list[Example]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty file, expected a header row")
    header = lines[0].split("\t")
    try:
        id_col = header.index("sentence_id")
        text_col = header.index("sentence")
    except ValueError as exc:
        raise DataError(f"{path}: header must name sentence_id and sentence columns") from exc
    label_col = header.index("label") if "label" in header else None
    if require_labels and label_col is None:
        raise DataError(f"{path}: label column required")

    examples: list[Example] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        fields = raw.split("\t")
        sid, text = fields[id_col], fields[text_col]
        if sid in seen:
            raise DataError(f"{path}:{lineno}: duplicate sentence_id {sid!r}")
        seen.add(sid)
        if not text.strip():
            raise DataError(f"{path}:{lineno}: empty sentence text")
        label: Optional[int] = None
        if label_col is not None and label_col < len(fields) and fields[label_col]:
            if fields[label_col] not in LABEL_TO_INDEX:
                raise DataError(f"{path}:{lineno}: label {fields[label_col]!r} not in {LABELS}")
            label = LABEL_TO_INDEX[fields[label_col]]
        elif require_labels:
            raise DataError(f"{path}:{lineno}: missing label")
        examples.append(Example(sid, text, label))
    if not examples:
        raise DataError(f"{path}: no data rows")
    return examples


def label_counts(examples: Sequence[Example]) -> tuple[int, int]:
    n_obj = sum(1 for e in examples if e.label == 0)
    n_subj = sum(1 for e in examples if e.label == 1)
    return n_obj, n_subj


def inverse_frequency_weights(examples: Sequence[Example]) -> tuple[float, float]:
    """w_c = N / (2 * n_c); identical to the pipeline's weighting."""
    n_obj, n_subj = label_counts(examples)
    if n_obj == 0 or n_subj == 0:
        raise DataError(f"both classes must occur in the training data (OBJ={n_obj}, SUBJ={n_subj})")
    total = n_obj + n_subj
    return total / (2.0 * n_obj), total / (2.0 * n_subj)


def iter_batches(
    examples: Sequence[Example],
    batch_size: int,
    shuffle: bool,
    rng: Optional[random.Random] = None,
) -> Iterator[list[Example]]:
    order = list(examples)
    if shuffle:
        (rng or random.Random()).shuffle(order)
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]
