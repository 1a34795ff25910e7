"""Corpus loading, statistics, anomaly detection, and curriculum building.

The canonical interchange format is a UTF-8 TSV with a header row and
columns ``sentence_id<TAB>sentence<TAB>label``. Labels are exactly
``SUBJ`` or ``OBJ``; the label column may be absent only for the test
split. Quote characters are treated literally (no CSV quoting), which
keeps sentences with unmatched quotation marks intact.
"""

from __future__ import annotations

import random
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import DataError

SPLITS = ("train", "dev", "dev-test", "test")

Tokenizer = Callable[[str], list[str]]


class Label(str, Enum):
    SUBJ = "SUBJ"
    OBJ = "OBJ"

    def __str__(self) -> str:  # serialize as the bare value
        return self.value


class MissingColumn(DataError):
    pass


class DuplicateId(DataError):
    pass


class EmptyText(DataError):
    pass


class BadLabel(DataError):
    pass


class UnlabeledRow(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptySpec(DataError):
    pass


@dataclass(frozen=True)
class LabeledSentence:
    """One corpus row."""

    sentence_id: str
    text: str
    label: Optional[Label]
    language: str
    split: str


@dataclass
class Corpus:
    """An ordered collection of sentences from one language/split.

    Curriculum merges relax the single-language invariant: the corpus
    carries the lead language while members keep their own.
    """

    language: str
    split: str
    sentences: list[LabeledSentence] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class LengthStats:
    total: int
    mean: float
    min: int
    max: int
    median: int


@dataclass(frozen=True)
class LabelDistribution:
    counts: dict
    subj_fraction: float

    def __getitem__(self, label: Label) -> int:
        return self.counts[label]


@dataclass(frozen=True)
class CurriculumSpec:
    """Ordered (language, path) entries plus the shuffle seed."""

    entries: Sequence[tuple[str, Path]]
    seed: int = 0

    def __post_init__(self) -> None:
        languages = [lang for lang, _ in self.entries]
        if len(set(languages)) != len(languages):
            raise DataError(f"curriculum entries must be unique by language: {languages}")


def default_tokenizer(text: str) -> list[str]:
    """Split on Unicode whitespace, then peel leading/trailing punctuation.

    Punctuation characters become tokens of their own, so ``"Hi,"``
    yields ``['"', 'Hi', ',', '"']``. This is a deliberately simple
    stand-in for subword tokenizers; callers may pass their own.
    """
    tokens: list[str] = []
    for chunk in text.split():
        leading: list[str] = []
        while chunk and _is_punct(chunk[0]):
            leading.append(chunk[0])
            chunk = chunk[1:]
        trailing: list[str] = []
        while chunk and _is_punct(chunk[-1]):
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(leading)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def load_split(path: str | Path, language: str, split: str) -> Corpus:
    """Load one TSV file into a Corpus.

    The label column is required unless ``split == "test"``; when present
    on a test file it is read normally. Extra columns are ignored.
    """
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}, expected one of {SPLITS}")
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MissingColumn(f"{path}: file is empty, expected a header row")

    header = lines[0].split("\t")
    try:
        id_col = header.index("sentence_id")
        text_col = header.index("sentence")
    except ValueError as exc:
        raise MissingColumn(f"{path}: header must name sentence_id and sentence columns") from exc
    label_col = header.index("label") if "label" in header else None
    if label_col is None and split != "test":
        raise MissingColumn(f"{path}: label column required for split {split!r}")

    sentences: list[LabeledSentence] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        fields = raw.split("\t")
        needed = max(id_col, text_col) + 1
        if len(fields) < needed:
            raise DataError(f"{path}:{lineno}: expected at least {needed} columns, got {len(fields)}")
        sentence_id = fields[id_col]
        text = fields[text_col]
        if not sentence_id:
            raise DataError(f"{path}:{lineno}: empty sentence_id")
        if sentence_id in seen:
            raise DuplicateId(f"{path}:{lineno}: duplicate sentence_id {sentence_id!r}")
        seen.add(sentence_id)
        if not text.strip():
            raise EmptyText(f"{path}:{lineno}: empty sentence text for id {sentence_id!r}")
        label: Optional[Label] = None
        raw_label = fields[label_col] if label_col is not None and label_col < len(fields) else ""
        if raw_label:
            try:
                label = Label(raw_label)
            except ValueError:
                raise BadLabel(f"{path}:{lineno}: label {raw_label!r} not in (SUBJ, OBJ)") from None
        elif split != "test":
            raise BadLabel(f"{path}:{lineno}: missing label for id {sentence_id!r} in split {split!r}")
        sentences.append(LabeledSentence(sentence_id, text, label, language, split))
    return Corpus(language=language, split=split, sentences=sentences)


def save_split(corpus: Corpus, path: str | Path) -> None:
    """Write a Corpus back to the canonical TSV format.

    The label column is emitted whenever any sentence carries a label;
    unlabeled rows then get an empty cell (legal only for test files).
    """
    path = Path(path)
    with_labels = any(s.label is not None for s in corpus)
    rows = ["sentence_id\tsentence" + ("\tlabel" if with_labels else "")]
    for s in corpus:
        for value, what in ((s.sentence_id, "sentence_id"), (s.text, "text")):
            if "\t" in value or "\n" in value or "\r" in value:
                raise DataError(f"{what} of {s.sentence_id!r} contains a tab or newline")
        row = f"{s.sentence_id}\t{s.text}"
        if with_labels:
            row += "\t" + (s.label.value if s.label is not None else "")
        rows.append(row)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def label_distribution(corpus: Corpus) -> LabelDistribution:
    """Per-label counts and the SUBJ fraction of a fully labeled corpus."""
    counts = {Label.SUBJ: 0, Label.OBJ: 0}
    for s in corpus:
        if s.label is None:
            raise UnlabeledRow(f"sentence {s.sentence_id!r} has no label")
        counts[s.label] += 1
    total = counts[Label.SUBJ] + counts[Label.OBJ]
    fraction = counts[Label.SUBJ] / total if total else 0.0
    return LabelDistribution(counts=counts, subj_fraction=fraction)


def token_stats(corpus: Corpus, tokenizer: Tokenizer | None = None) -> LengthStats:
    """Token-count statistics over the corpus.

    The median of an even-length corpus is the lower-middle element, so
    all reported statistics except the mean stay integral.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot compute token statistics of an empty corpus")
    tokenize = tokenizer or default_tokenizer
    counts = sorted(len(tokenize(s.text)) for s in corpus)
    n = len(counts)
    return LengthStats(
        total=n,
        mean=sum(counts) / n,
        min=counts[0],
        max=counts[-1],
        median=counts[(n - 1) // 2],
    )


def detect_anomalies(
    corpus: Corpus,
    tokenizer: Tokenizer | None = None,
    max_tokens: int = 500,
) -> list[tuple[str, int]]:
    """Rows whose token count exceeds ``max_tokens``, longest first.

    Typical culprits are unmatched quotation marks that glue whole
    paragraphs into one "sentence". Rows are reported, never dropped.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    tokenize = tokenizer or default_tokenizer
    flagged = [(s.sentence_id, len(tokenize(s.text))) for s in corpus]
    flagged = [(sid, n) for sid, n in flagged if n > max_tokens]
    flagged.sort(key=lambda item: -item[1])
    return flagged


def build_curriculum(spec: CurriculumSpec) -> Corpus:
    """Concatenate train files in spec order, then shuffle deterministically.

    The shuffle is a Fisher-Yates pass driven by Python's Mersenne
    Twister (``random.Random(seed).shuffle``), so equal seeds reproduce
    the exact row order. The merged corpus keeps the first entry's
    language as its lead language.
    """
    if not spec.entries:
        raise EmptySpec("curriculum spec has no entries")
    merged: list[LabeledSentence] = []
    for language, path in spec.entries:
        part = load_split(path, language=language, split="train")
        merged.extend(part.sentences)
    random.Random(spec.seed).shuffle(merged)
    return Corpus(language=spec.entries[0][0], split="train", sentences=merged)
