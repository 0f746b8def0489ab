"""Expected calibration error and calibration-derived ensemble weights.

Confidence for a token is the largest entry of its probability vector, and a
token counts as correct when the argmax tag equals the gold tag. Confidences
fall into equal-width bins over (0, 1]: bin b covers (b/B, (b+1)/B], with an
exact confidence of 0 joining bin 0. Then

    ECE = sum_b (n_b / n) * |accuracy_b - mean_confidence_b|

Weights invert ECE: models that are better calibrated get more say.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from .errors import AlignmentError, ConfigError, EmptyInput
from .labels import TAGS
from .predictions import PredictionSet, argmax_index
from .tokenizer import TokenizedCorpus


@dataclass(frozen=True, slots=True)
class CalibrationBin:
    lo: float
    hi: float
    count: int
    mean_confidence: float
    accuracy: float


@dataclass(frozen=True)
class CalibrationReport:
    model_id: str
    ece: float
    total: int
    bins: tuple[CalibrationBin, ...]

    def to_record(self) -> dict:
        return {
            "model_id": self.model_id,
            "ece": self.ece,
            "total": self.total,
            "bins": [
                {
                    "lo": b.lo,
                    "hi": b.hi,
                    "count": b.count,
                    "mean_confidence": b.mean_confidence,
                    "accuracy": b.accuracy,
                }
                for b in self.bins
            ],
        }

    @staticmethod
    def from_record(rec: dict) -> "CalibrationReport":
        return CalibrationReport(
            model_id=rec["model_id"],
            ece=rec["ece"],
            total=rec["total"],
            bins=tuple(
                CalibrationBin(
                    lo=b["lo"],
                    hi=b["hi"],
                    count=b["count"],
                    mean_confidence=b["mean_confidence"],
                    accuracy=b["accuracy"],
                )
                for b in rec["bins"]
            ),
        )


@dataclass(frozen=True)
class WeightVector:
    """Per-model ensemble weights, in member order, summing to 1."""

    weights: dict[str, float]


def bin_index(confidence: float, num_bins: int) -> int:
    """Bin of a confidence under the (b/B, (b+1)/B] scheme; 0 lands in bin 0."""
    return max(0, min(num_bins - 1, math.ceil(confidence * num_bins) - 1))


def compute_ece(pred: PredictionSet, corpus: TokenizedCorpus, num_bins: int = 10) -> CalibrationReport:
    if num_bins < 1:
        raise ConfigError(f"num_bins must be >= 1, got {num_bins}")
    if not corpus.has_gold:
        raise AlignmentError("calibration requires gold tags on every token")
    total = corpus.total_tokens()
    if total == 0:
        raise EmptyInput("cannot calibrate against an empty corpus")
    if len(pred.rows) != total:
        raise AlignmentError(
            f"{pred.model_id}: {len(pred.rows)} rows for {total} corpus tokens"
        )
    counts = [0] * num_bins
    conf_sums = [0.0] * num_bins
    hit_sums = [0] * num_bins
    for doc in corpus.documents:
        for pos, tok in enumerate(doc.tokens):
            row = pred.rows.get((tok.doc_id, tok.index))
            if row is None:
                raise AlignmentError(f"{pred.model_id}: no row for {tok.doc_id} token {tok.index}")
            confidence = max(row.probs)
            b = bin_index(confidence, num_bins)
            counts[b] += 1
            conf_sums[b] += confidence
            if TAGS[argmax_index(row.probs)] is doc.tags[pos]:
                hit_sums[b] += 1
    bins = []
    gaps = []
    for b in range(num_bins):
        lo, hi = b / num_bins, (b + 1) / num_bins
        if counts[b] == 0:
            bins.append(CalibrationBin(lo=lo, hi=hi, count=0, mean_confidence=0.0, accuracy=0.0))
            continue
        mean_conf = conf_sums[b] / counts[b]
        accuracy = hit_sums[b] / counts[b]
        bins.append(
            CalibrationBin(lo=lo, hi=hi, count=counts[b], mean_confidence=mean_conf, accuracy=accuracy)
        )
        gaps.append((counts[b] / total) * abs(accuracy - mean_conf))
    return CalibrationReport(model_id=pred.model_id, ece=math.fsum(gaps), total=total, bins=tuple(bins))


def inverse_ece_rule(epsilon: float) -> Callable[[float], float]:
    def score(ece: float) -> float:
        return 1.0 / (ece + epsilon)

    return score


def ece_weights(
    reports: Sequence[CalibrationReport],
    epsilon: float = 1e-6,
    rule: Callable[[float], float] | None = None,
) -> WeightVector:
    """Turn calibration reports into normalized weights, lower ECE weighing more.

    The default rule scores a model as 1/(ece + epsilon). A custom rule maps
    an ECE to any positive raw score and is normalized the same way.
    """
    if not reports:
        raise EmptyInput("no calibration reports to weight")
    ids = [r.model_id for r in reports]
    if len(set(ids)) != len(ids):
        raise AlignmentError(f"duplicate model ids in calibration reports: {ids}")
    score = rule if rule is not None else inverse_ece_rule(epsilon)
    raw = [score(r.ece) for r in reports]
    for model_id, value in zip(ids, raw):
        if not math.isfinite(value) or value <= 0.0:
            raise ConfigError(f"weight rule produced a non-positive score {value!r} for {model_id}")
    z = math.fsum(raw)
    return WeightVector(weights={model_id: value / z for model_id, value in zip(ids, raw)})
