"""Post-hoc calibration and decision policy for two-class logits.

Logits follow the ``[OBJ, SUBJ]`` order everywhere, including the JSONL
interchange format (one ``{"sentence_id": ..., "logits": [z_obj, z_subj]}``
object per line). The prediction pipeline is fixed as
scale -> softmax -> threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Label
from .errors import DataError


class NonFinite(DataError):
    pass


class NonPositiveTemperature(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class TooFewRecords(DataError):
    pass


class InvalidProbabilities(DataError):
    pass


class ZeroClassCount(DataError):
    pass


class ZeroProbabilityForGold(DataError):
    pass


@dataclass(frozen=True)
class LogitRecord:
    sentence_id: str
    logits: tuple[float, float]  # (z_obj, z_subj)


@dataclass(frozen=True)
class CalibrationModel:
    temperature: float
    fitted_on: str
    nll: float


@dataclass(frozen=True)
class DecisionPolicy:
    """SUBJ is predicted when p_subj >= subj_threshold (ties go to SUBJ)."""

    subj_threshold: float = 0.45

    def __post_init__(self) -> None:
        if not 0.0 < self.subj_threshold < 1.0:
            raise DataError(f"subj_threshold must lie in (0, 1), got {self.subj_threshold}")


@dataclass(frozen=True)
class ClassWeights:
    w_obj: float
    w_subj: float


# Golden-section constants: 1/phi and 1/phi^2.
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def softmax(logits: Sequence[float]) -> tuple[float, float]:
    """Numerically stable two-class softmax (max-subtraction)."""
    z_obj, z_subj = logits
    if not (math.isfinite(z_obj) and math.isfinite(z_subj)):
        raise NonFinite(f"logits must be finite, got {logits!r}")
    m = max(z_obj, z_subj)
    e_obj = math.exp(z_obj - m)
    e_subj = math.exp(z_subj - m)
    total = e_obj + e_subj
    return (e_obj / total, e_subj / total)


def scale(logits: Sequence[float], temperature: float) -> tuple[float, float]:
    """Divide logits elementwise by a positive temperature.

    Scaling changes confidence but never the argmax.
    """
    if not (math.isfinite(temperature) and temperature > 0.0):
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    z_obj, z_subj = logits
    return (z_obj / temperature, z_subj / temperature)


def decide(probs: Sequence[float], policy: DecisionPolicy) -> Label:
    """Map a probability pair to a label under the threshold policy."""
    p_obj, p_subj = probs
    if not (math.isfinite(p_obj) and math.isfinite(p_subj)):
        raise InvalidProbabilities(f"probabilities must be finite, got {probs!r}")
    if min(p_obj, p_subj) < 0.0 or abs(p_obj + p_subj - 1.0) > 1e-9:
        raise InvalidProbabilities(f"probabilities must be non-negative and sum to 1, got {probs!r}")
    return Label.SUBJ if p_subj >= policy.subj_threshold else Label.OBJ


def class_weights(distribution: Mapping[Label, int]) -> ClassWeights:
    """Inverse-frequency weights w_c = N / (2 * n_c) for the two classes."""
    counts = getattr(distribution, "counts", distribution)
    n_obj = counts[Label.OBJ]
    n_subj = counts[Label.SUBJ]
    if n_obj <= 0 or n_subj <= 0:
        raise ZeroClassCount(f"both classes must occur, got OBJ={n_obj}, SUBJ={n_subj}")
    total = n_obj + n_subj
    return ClassWeights(w_obj=total / (2.0 * n_obj), w_subj=total / (2.0 * n_subj))


def focal_loss(
    probs: Sequence[float],
    gold: Label,
    gamma: float = 2.0,
    weights: ClassWeights = ClassWeights(1.0, 1.0),
) -> float:
    """Class-weighted focal term -alpha_t * (1 - p_t)^gamma * log(p_t).

    At gamma = 0 this is weighted cross-entropy; at p_t = 1 it is zero.
    """
    if gamma < 0.0:
        raise DataError(f"gamma must be >= 0, got {gamma}")
    p_obj, p_subj = probs
    p_t = p_subj if gold is Label.SUBJ else p_obj
    alpha_t = weights.w_subj if gold is Label.SUBJ else weights.w_obj
    if p_t <= 0.0:
        raise ZeroProbabilityForGold(f"gold class has probability {p_t}")
    return -alpha_t * (1.0 - p_t) ** gamma * math.log(p_t)


def _nll_curve(logits: np.ndarray, gold_idx: np.ndarray, temperature: float) -> float:
    """Mean negative log-likelihood of golds under softmax(z / T)."""
    z = logits / temperature
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(z)), gold_idx]))


def _golden_min(f, a: float, b: float, tol: float) -> float:
    """Golden-section search for the minimizer of a unimodal f on [a, b]."""
    h = b - a
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc, yd = f(c), f(d)
    while h > tol:
        h *= _INV_PHI
        if yc < yd:
            b, d, yd = d, c, yc
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            d = a + _INV_PHI * h
            yd = f(d)
    return (a + b) / 2.0


def mean_nll(records: Sequence[LogitRecord], golds: Sequence[Label], temperature: float = 1.0) -> float:
    """Mean NLL of gold labels under softmax(z / T), for reporting."""
    if not (math.isfinite(temperature) and temperature > 0.0):
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    if len(records) != len(golds):
        raise DataError(f"{len(records)} records but {len(golds)} gold labels")
    logits = np.array([r.logits for r in records], dtype=float)
    gold_idx = np.array([1 if g is Label.SUBJ else 0 for g in golds])
    return _nll_curve(logits, gold_idx, temperature)


def fit_temperature(
    records: Sequence[LogitRecord],
    golds: Sequence[Label],
    fitted_on: str = "",
    tol: float = 1e-6,
) -> CalibrationModel:
    """Fit the temperature minimizing mean NLL of the gold labels.

    The search is golden-section over log T on [-5, 5] (T between e^-5
    and e^5). The result never has higher NLL than T = 1: if the search
    lands worse (flat or boundary-hugging curves), T = 1 is kept.
    """
    if len(records) < 2:
        raise TooFewRecords(f"need at least 2 records, got {len(records)}")
    if len(records) != len(golds):
        raise DataError(f"{len(records)} records but {len(golds)} gold labels")
    if len(set(golds)) < 2:
        raise DegenerateLabels("both classes must be present in the gold labels")

    logits = np.array([r.logits for r in records], dtype=float)
    if not np.all(np.isfinite(logits)):
        raise NonFinite("logit records contain non-finite values")
    gold_idx = np.array([1 if g is Label.SUBJ else 0 for g in golds])

    log_t = _golden_min(lambda u: _nll_curve(logits, gold_idx, math.exp(u)), -5.0, 5.0, tol)
    temperature = math.exp(log_t)
    nll = _nll_curve(logits, gold_idx, temperature)
    nll_identity = _nll_curve(logits, gold_idx, 1.0)
    if nll_identity < nll:
        temperature, nll = 1.0, nll_identity
    return CalibrationModel(temperature=temperature, fitted_on=fitted_on, nll=nll)


def calibrate_and_predict(
    records: Iterable[LogitRecord],
    model: CalibrationModel,
    policy: DecisionPolicy,
) -> list[tuple[str, Label]]:
    """Apply scale -> softmax -> threshold to every record."""
    return [
        (r.sentence_id, decide(softmax(scale(r.logits, model.temperature)), policy))
        for r in records
    ]


def load_logits(path: str | Path) -> list[LogitRecord]:
    """Read the JSONL logits format, validating shape and finiteness."""
    records: list[LogitRecord] = []
    seen: set[str] = set()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                sentence_id = obj["sentence_id"]
                z_obj, z_subj = obj["logits"]
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: expected sentence_id and a 2-element logits list") from exc
            if sentence_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate sentence_id {sentence_id!r}")
            seen.add(sentence_id)
            z_obj, z_subj = float(z_obj), float(z_subj)
            if not (math.isfinite(z_obj) and math.isfinite(z_subj)):
                raise NonFinite(f"{path}:{lineno}: non-finite logits")
            records.append(LogitRecord(sentence_id=sentence_id, logits=(z_obj, z_subj)))
    return records


def save_model(model: CalibrationModel, path: str | Path) -> None:
    payload = {"temperature": model.temperature, "fitted_on": model.fitted_on, "nll": model.nll}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> CalibrationModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    temperature = float(obj["temperature"])
    if not (math.isfinite(temperature) and temperature > 0.0):
        raise NonPositiveTemperature(f"{path}: temperature must be positive, got {temperature}")
    return CalibrationModel(
        temperature=temperature,
        fitted_on=str(obj.get("fitted_on", "")),
        nll=float(obj.get("nll", float("nan"))),
    )
