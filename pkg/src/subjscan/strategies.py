"""The three zero-shot classification strategies and the verdict parser.

Every strategy resolves one sentence to a SUBJ/OBJ verdict through a
fixed number of chat calls: annotation uses a single rule-guided call,
doubledown generates a subjective and an objective rewrite and then
adjudicates which one preserves the original meaning, and perspective
collects two independently reasoned analyses before a comparison call.

Prompt wording lives in text assets with ``{sentence}``-style
placeholders; swapping prompts requires no code changes.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .corpus import Corpus, Label, LabeledSentence
from .errors import ConfigError, DataError, SubjscanError
from .gateway import ChatGateway, ChatRequest, SamplingParams, cache_key

STRATEGIES = ("annotation", "doubledown", "perspective")

DEFAULT_MODELS = {
    "annotation": "o3-mini",
    "doubledown": "gpt-4.1-mini",
    "perspective": "gpt-4.1-mini",
}

PROMPT_NAMES = (
    "annotation",
    "dd_subj",
    "dd_obj",
    "dd_judge",
    "persp_subj",
    "persp_obj",
    "persp_judge",
)

_ASSETS_DIR = Path(__file__).parent / "assets"
DEFAULT_PROMPTS_DIR = _ASSETS_DIR / "prompts"
DEFAULT_RULES_PATH = _ASSETS_DIR / "rules" / "decision_rules.txt"


class Unparseable(DataError):
    """Neither the JSON stage nor the keyword stage found a verdict."""


class EmptyRewrite(DataError):
    """An intermediate generation step returned empty content."""


class StrategyError(SubjscanError):
    """A strategy failed for one sentence; keeps the partial call trace."""

    def __init__(self, sentence_id: str, strategy: str, cause: Exception, trace: list[str]):
        super().__init__(f"{strategy} failed for sentence {sentence_id!r}: {cause}")
        self.sentence_id = sentence_id
        self.strategy = strategy
        self.cause = cause
        self.trace = list(trace)


@dataclass(frozen=True)
class Verdict:
    label: Label
    explanation: str
    parse_path: str  # "json" or "keyword"


@dataclass(frozen=True)
class StrategyResult:
    sentence_id: str
    strategy: str
    verdict: Verdict
    trace: tuple[str, ...]
    intermediates: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RuleSet:
    """The subjectivity decision guidelines embedded into prompts."""

    rules: tuple[str, ...]
    source: str
    sha256: str

    def __post_init__(self) -> None:
        if not self.rules:
            raise ConfigError(f"rule set {self.source!r} is empty")

    def as_prompt_block(self) -> str:
        return "\n".join(f"{i}. {rule}" for i, rule in enumerate(self.rules, start=1))


def load_rules(path: str | Path | None = None) -> RuleSet:
    """Read a rule file: one rule per line, ``#`` lines are comments."""
    path = Path(path) if path is not None else DEFAULT_RULES_PATH
    raw = path.read_bytes()
    rules = [
        line.strip()
        for line in raw.decode("utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    return RuleSet(rules=tuple(rules), source=str(path), sha256=hashlib.sha256(raw).hexdigest())


class PromptLibrary:
    """Loads the seven strategy templates from a directory.

    Placeholders are substituted literally (``{sentence}`` etc.), so
    JSON braces in template text are left untouched.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else DEFAULT_PROMPTS_DIR
        self._templates: dict[str, str] = {}
        self._hashes: dict[str, str] = {}
        for name in PROMPT_NAMES:
            path = self.directory / f"{name}.txt"
            if not path.exists():
                raise ConfigError(f"prompt template missing: {path}")
            raw = path.read_bytes()
            self._templates[name] = raw.decode("utf-8")
            self._hashes[name] = hashlib.sha256(raw).hexdigest()

    def render(self, name: str, **substitutions: str) -> str:
        text = self._templates[name]
        for key, value in substitutions.items():
            text = text.replace("{" + key + "}", value)
        return text

    def hashes(self) -> dict[str, str]:
        return dict(self._hashes)


def parse_verdict(raw: str) -> Verdict:
    """Two-stage parse of a model response.

    Stage 1 looks for the first JSON object in the text and reads its
    ``verdict`` (and optional ``explanation``) field. Stage 2 falls back
    to a case-insensitive scan for "subjective"/"objective", earliest
    occurrence winning; neither word is a substring of the other, so the
    scan is unambiguous.
    """
    parsed = _first_json_object(raw)
    if parsed is not None and "verdict" in parsed:
        label = _label_from_text(str(parsed["verdict"]), "subj", "obj")
        if label is not None:
            return Verdict(label=label, explanation=str(parsed.get("explanation", "")), parse_path="json")
    label = _label_from_text(raw, "subjective", "objective")
    if label is not None:
        return Verdict(label=label, explanation=raw, parse_path="keyword")
    raise Unparseable(f"no verdict found in response {raw[:120]!r}")


def _first_json_object(raw: str) -> Optional[dict]:
    decoder = json.JSONDecoder()
    start = raw.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            start = raw.find("{", start + 1)
            continue
        return obj if isinstance(obj, dict) else None
    return None


def _label_from_text(text: str, subj_token: str, obj_token: str) -> Optional[Label]:
    low = text.lower()
    i_subj = low.find(subj_token)
    i_obj = low.find(obj_token)
    if i_subj == -1 and i_obj == -1:
        return None
    if i_obj == -1 or (i_subj != -1 and i_subj < i_obj):
        return Label.SUBJ
    return Label.OBJ


def _call(
    gateway: ChatGateway,
    model: str,
    prompt: str,
    trace: list[str],
    sampling: Optional[SamplingParams] = None,
) -> str:
    """Issue one chat call, recording the request digest before sending."""
    request = ChatRequest.user(model=model, content=prompt, sampling=sampling)
    trace.append(cache_key(request))
    return gateway.exchange(request).response.content


def classify_annotation(
    sentence: LabeledSentence,
    rules: RuleSet,
    gateway: ChatGateway,
    prompts: Optional[PromptLibrary] = None,
    model: str = DEFAULT_MODELS["annotation"],
    sampling: Optional[SamplingParams] = None,
) -> StrategyResult:
    """Single rule-guided call; verdict read from the response."""
    prompts = prompts or PromptLibrary()
    trace: list[str] = []
    try:
        content = _call(
            gateway,
            model,
            prompts.render("annotation", rules=rules.as_prompt_block(), sentence=sentence.text),
            trace,
            sampling,
        )
        verdict = parse_verdict(content)
    except SubjscanError as exc:
        raise StrategyError(sentence.sentence_id, "annotation", exc, trace) from exc
    return StrategyResult(sentence.sentence_id, "annotation", verdict, tuple(trace))


def classify_doubledown(
    sentence: LabeledSentence,
    gateway: ChatGateway,
    prompts: Optional[PromptLibrary] = None,
    model: str = DEFAULT_MODELS["doubledown"],
    sampling: Optional[SamplingParams] = None,
) -> StrategyResult:
    """Subjective rewrite, objective rewrite, then meaning adjudication."""
    prompts = prompts or PromptLibrary()
    trace: list[str] = []
    try:
        rewrite_subj = _call(gateway, model, prompts.render("dd_subj", sentence=sentence.text), trace, sampling)
        if not rewrite_subj.strip():
            raise EmptyRewrite("subjective rewrite came back empty")
        rewrite_obj = _call(gateway, model, prompts.render("dd_obj", sentence=sentence.text), trace, sampling)
        if not rewrite_obj.strip():
            raise EmptyRewrite("objective rewrite came back empty")
        judged = _call(
            gateway,
            model,
            prompts.render(
                "dd_judge",
                sentence=sentence.text,
                rewrite_subj=rewrite_subj,
                rewrite_obj=rewrite_obj,
            ),
            trace,
            sampling,
        )
        verdict = parse_verdict(judged)
    except SubjscanError as exc:
        raise StrategyError(sentence.sentence_id, "doubledown", exc, trace) from exc
    return StrategyResult(
        sentence.sentence_id,
        "doubledown",
        verdict,
        tuple(trace),
        intermediates={"rewrite_subj": rewrite_subj, "rewrite_obj": rewrite_obj},
    )


def classify_perspective(
    sentence: LabeledSentence,
    gateway: ChatGateway,
    prompts: Optional[PromptLibrary] = None,
    model: str = DEFAULT_MODELS["perspective"],
    sampling: Optional[SamplingParams] = None,
) -> StrategyResult:
    """Two independent angle analyses, then a comparison call.

    The analyses are separate requests that never see each other, so
    each is reasoned independently.
    """
    prompts = prompts or PromptLibrary()
    trace: list[str] = []
    try:
        analysis_subj = _call(gateway, model, prompts.render("persp_subj", sentence=sentence.text), trace, sampling)
        if not analysis_subj.strip():
            raise EmptyRewrite("subjective-angle analysis came back empty")
        analysis_obj = _call(gateway, model, prompts.render("persp_obj", sentence=sentence.text), trace, sampling)
        if not analysis_obj.strip():
            raise EmptyRewrite("objective-angle analysis came back empty")
        judged = _call(
            gateway,
            model,
            prompts.render(
                "persp_judge",
                sentence=sentence.text,
                analysis_subj=analysis_subj,
                analysis_obj=analysis_obj,
            ),
            trace,
            sampling,
        )
        verdict = parse_verdict(judged)
    except SubjscanError as exc:
        raise StrategyError(sentence.sentence_id, "perspective", exc, trace) from exc
    return StrategyResult(
        sentence.sentence_id,
        "perspective",
        verdict,
        tuple(trace),
        intermediates={"analysis_subj": analysis_subj, "analysis_obj": analysis_obj},
    )


_CLASSIFIERS = {
    "annotation": lambda s, gw, prompts, rules, model, sampling: classify_annotation(
        s, rules, gw, prompts, model, sampling
    ),
    "doubledown": lambda s, gw, prompts, rules, model, sampling: classify_doubledown(
        s, gw, prompts, model, sampling
    ),
    "perspective": lambda s, gw, prompts, rules, model, sampling: classify_perspective(
        s, gw, prompts, model, sampling
    ),
}

FALLBACK_MODES = ("obj", "subj", "error")


@dataclass
class BatchEntry:
    sentence_id: str
    label: Optional[Label]
    parse_path: str  # json | keyword | fallback | error
    trace: tuple[str, ...]
    result: Optional[StrategyResult] = None
    error: Optional[str] = None
    error_kind: Optional[str] = None  # data | transport


@dataclass
class BatchResult:
    strategy: str
    model: str
    entries: list[BatchEntry]
    fallback_count: int
    error_count: int

    def predictions(self) -> list[tuple[str, Label]]:
        return [(e.sentence_id, e.label) for e in self.entries if e.label is not None]


def run_batch(
    corpus: Corpus,
    strategy: str,
    gateway: ChatGateway,
    prompts: Optional[PromptLibrary] = None,
    rules: Optional[RuleSet] = None,
    model: Optional[str] = None,
    concurrency: int = 4,
    fallback: str = "obj",
    sampling: Optional[SamplingParams] = None,
) -> BatchResult:
    """Classify a whole corpus, preserving corpus order in the output.

    Unparseable responses get the fallback label (OBJ by default, the
    majority class of every training split) and are flagged; transport
    failures are collected per sentence without aborting the batch.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    if fallback not in FALLBACK_MODES:
        raise ConfigError(f"fallback must be one of {FALLBACK_MODES}, got {fallback!r}")
    if len(corpus) == 0:
        raise DataError("cannot classify an empty corpus")
    prompts = prompts or PromptLibrary()
    if strategy == "annotation" and rules is None:
        rules = load_rules()
    model = model or DEFAULT_MODELS[strategy]
    classify = _CLASSIFIERS[strategy]

    def work(sentence: LabeledSentence) -> BatchEntry:
        try:
            result = classify(sentence, gateway, prompts, rules, model, sampling)
        except StrategyError as exc:
            if isinstance(exc.cause, Unparseable) and fallback != "error":
                label = Label.OBJ if fallback == "obj" else Label.SUBJ
                return BatchEntry(
                    sentence.sentence_id, label, "fallback", tuple(exc.trace), error=str(exc.cause)
                )
            kind = "data" if isinstance(exc.cause, DataError) else "transport"
            return BatchEntry(
                sentence.sentence_id, None, "error", tuple(exc.trace), error=str(exc), error_kind=kind
            )
        return BatchEntry(
            result.sentence_id, result.verdict.label, result.verdict.parse_path, result.trace, result=result
        )

    with ThreadPoolExecutor(max_workers=max(1, min(concurrency, len(corpus)))) as pool:
        entries = list(pool.map(work, corpus.sentences))

    return BatchResult(
        strategy=strategy,
        model=model,
        entries=entries,
        fallback_count=sum(1 for e in entries if e.parse_path == "fallback"),
        error_count=sum(1 for e in entries if e.parse_path == "error"),
    )


def write_predictions(pairs: Sequence[tuple[str, Label]], path: str | Path) -> None:
    """Write the scorer-convention predictions TSV."""
    lines = ["sentence_id\tlabel"]
    lines.extend(f"{sid}\t{label.value}" for sid, label in pairs)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
