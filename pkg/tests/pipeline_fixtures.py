"""Shared test helpers: synthetic corpora, canned chat responses, mock gateways."""

from __future__ import annotations

from pathlib import Path

from subjscan.corpus import Label, LabeledSentence
from subjscan.gateway import ChatGateway, MockBackend, MockRule

# Per-language (SUBJ, OBJ) counts for the train/dev/dev-test splits of the
# shared-task data; fixture corpora are generated to these exact sizes.
SPLIT_COUNTS = {
    ("en", "train"): (298, 532),
    ("en", "dev"): (240, 222),
    ("en", "dev-test"): (122, 362),
    ("it", "train"): (382, 1231),
    ("it", "dev"): (177, 490),
    ("it", "dev-test"): (136, 377),
    ("de", "train"): (308, 492),
    ("de", "dev"): (174, 317),
    ("de", "dev-test"): (111, 226),
    ("bg", "train"): (323, 406),
    ("bg", "dev"): (292, 175),
    ("ar", "train"): (1055, 1391),
    ("ar", "dev"): (476, 266),
    ("ar", "dev-test"): (323, 425),
    ("bg", "dev-test"): (107, 143),
}

BLANCO = (
    "Blanco established himself earlier in his career working for "
    "Dr. Luke's Kasz Money Productions."
)

# Canned model outputs for the Blanco example, one per strategy stage.
ANNOTATION_BOXED = (
    "The sentence provides factual information about Blanco's career and his "
    "affiliation with a production company. It does not include any indications "
    "of personal opinion, sarcastic remarks, or evaluative language by the "
    "author. Instead, it merely states a historical fact, which aligns with the "
    "criteria for an objective sentence. Label: OBJ"
)
DD_REWRITE_SUBJ = (
    "In my view, Blanco really made a name for himself early on thanks to his "
    "work with Dr. Luke's Kasz Money Productions collaboration that, to me, "
    "marked a crucial turning point in his career."
)
DD_REWRITE_OBJ = "Blanco worked earlier in his career at Dr. Luke's Kasz Money Productions."
DD_ADJUDICATION = (
    "Since the objective rewrite more closely reflects the original sentence "
    "and presents it as a factual career statement with only minor evaluative "
    "elements, the original is classified as OBJ."
)
PERSP_ANALYSIS_SUBJ = (
    "The phrase 'established himself' is an evaluative judgment: what counts as "
    "established varies by individual perception, so the claim reflects a "
    "personal assessment rather than a measurable fact."
)
PERSP_ANALYSIS_OBJ = (
    "The sentence refers to a verifiable employment fact: Blanco worked for "
    "Dr. Luke's Kasz Money Productions earlier in his career, which can be "
    "independently confirmed."
)
PERSP_BOXED = (
    "The statement contains elements that can be viewed both subjectively and "
    "objectively. The subjective analysis points out that the phrase "
    "\"established himself\" is open to interpretation, as what qualifies as "
    "\"established\" can vary by individual perception, making it a somewhat "
    "evaluative judgment. The objective analysis highlights that the statement "
    "refers to a verifiable fact: Blanco worked for Dr. Luke's Kasz Money "
    "Productions earlier in his career. This part can be independently "
    "confirmed. However, the key phrase \"established himself\" goes beyond "
    "merely stating a fact about employment; it implies a level of success, "
    "recognition, or impact, which is inherently subjective because these "
    "concepts differ across perspectives. Therefore, while the statement "
    "contains a factual component, the primary assertion involves a subjective "
    "judgment. Given this, the subjective analysis is more convincing because "
    "the core claim revolves around the idea of \"establishing oneself\", which "
    "is not a strictly objective measure. Label: SUBJ"
)

# Regexes anchored to unique template phrases, one per prompt asset.
PATTERN_ANNOTATION = r"You are annotating sentences"
PATTERN_DD_SUBJ = r"openly subjective style"
PATTERN_DD_OBJ = r"strictly objective tone"
PATTERN_DD_JUDGE = r"two rewrites of it"
PATTERN_PERSP_SUBJ = r"might be considered subjective"
PATTERN_PERSP_OBJ = r"might be considered objective"
PATTERN_PERSP_JUDGE = r"two contrasting angles"


def write_corpus_tsv(path: Path, language: str, split: str, n_subj: int, n_obj: int) -> Path:
    """Write a synthetic labeled TSV with the requested class counts."""
    lines = ["sentence_id\tsentence\tlabel"]
    for i in range(n_subj):
        lines.append(f"{language}-{split}-s{i}\tThis really is a wonderful sample sentence number {i}.\tSUBJ")
    for i in range(n_obj):
        lines.append(f"{language}-{split}-o{i}\tThe report describes sample event number {i}.\tOBJ")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_sentence(text: str = BLANCO, sentence_id: str = "blanco-1") -> LabeledSentence:
    return LabeledSentence(sentence_id=sentence_id, text=text, label=None, language="en", split="test")


def make_gateway(rules, default=None, cache=None, concurrency_limit=4, max_attempts=5):
    """Gateway over a scripted mock backend with sleeps disabled."""
    from subjscan.gateway import RetryPolicy

    backend = MockBackend([MockRule(**r) if isinstance(r, dict) else r for r in rules], default_content=default)
    gateway = ChatGateway(
        backend,
        cache=cache,
        retry=RetryPolicy(max_attempts=max_attempts),
        concurrency_limit=concurrency_limit,
        sleeper=lambda _s: None,
    )
    return gateway, backend


def blanco_mock_rules():
    """Mock script answering all three strategies for the Blanco sentence."""
    return [
        {"pattern": PATTERN_ANNOTATION, "content": ANNOTATION_BOXED},
        {"pattern": PATTERN_DD_SUBJ, "content": DD_REWRITE_SUBJ},
        {"pattern": PATTERN_DD_OBJ, "content": DD_REWRITE_OBJ},
        {"pattern": PATTERN_DD_JUDGE, "content": DD_ADJUDICATION},
        {"pattern": PATTERN_PERSP_SUBJ, "content": PERSP_ANALYSIS_SUBJ},
        {"pattern": PATTERN_PERSP_OBJ, "content": PERSP_ANALYSIS_OBJ},
        {"pattern": PATTERN_PERSP_JUDGE, "content": PERSP_BOXED},
    ]


def subj_obj(labels: list[str]) -> list[Label]:
    return [Label.SUBJ if x == "S" else Label.OBJ for x in labels]
