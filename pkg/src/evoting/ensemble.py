"""Token-level ensembling: soft, hard, and calibration-weighted voting.

All strategies combine member models token by token, before any span
decoding. Members must cover exactly the same tokens with the same offsets.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

from .calibration import WeightVector
from .errors import AlignmentError, ConfigError, EmptyEnsemble, WeightMismatch
from .labels import NUM_TAGS, TAGS
from .predictions import (
    LabelRow,
    LabelSequence,
    PredictionRow,
    PredictionSet,
    argmax_index,
    normalize_vector,
)

SOFT_ID = "ensemble:soft"
HARD_ID = "ensemble:hard"
WEIGHTED_ID = "ensemble:weighted"

STRATEGIES = ("soft", "hard", "weighted")


@dataclass(frozen=True)
class EnsembleConfig:
    strategy: str
    model_ids: tuple[str, ...]
    weights: WeightVector | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not self.model_ids:
            raise ConfigError("an ensemble needs at least one member")
        if self.strategy == "weighted" and self.weights is None:
            raise ConfigError("weighted voting requires calibration-derived weights")


def _check_members(members: Sequence[PredictionSet]) -> None:
    if not members:
        raise EmptyEnsemble("no member predictions to combine")
    first = members[0]
    for other in members[1:]:
        if other.rows.keys() != first.rows.keys():
            only_first = next(iter(first.rows.keys() - other.rows.keys()), None)
            only_other = next(iter(other.rows.keys() - first.rows.keys()), None)
            raise AlignmentError(
                f"members {first.model_id!r} and {other.model_id!r} cover different tokens "
                f"(e.g. {only_first or only_other})"
            )
        for key, row in first.rows.items():
            o = other.rows[key]
            if o.start != row.start or o.end != row.end:
                raise AlignmentError(
                    f"members {first.model_id!r} and {other.model_id!r} disagree on offsets at {key}"
                )


def soft_vote(members: Sequence[PredictionSet]) -> PredictionSet:
    """Mean of the member vectors per token, renormalized."""
    _check_members(members)
    n = len(members)
    rows: dict = {}
    for key, first_row in members[0].rows.items():
        mean = [
            math.fsum(m.rows[key].probs[k] for m in members) / n
            for k in range(NUM_TAGS)
        ]
        rows[key] = PredictionRow(
            doc_id=first_row.doc_id,
            index=first_row.index,
            start=first_row.start,
            end=first_row.end,
            probs=normalize_vector(mean, context=f"soft vote at {key}"),
        )
    return PredictionSet(model_id=SOFT_ID, rows=rows)


def weighted_vote(members: Sequence[PredictionSet], weights: WeightVector) -> PredictionSet:
    """Weighted sum of member vectors; weights sum to 1, so no renormalization."""
    _check_members(members)
    member_ids = [m.model_id for m in members]
    if set(weights.weights) != set(member_ids) or len(member_ids) != len(set(member_ids)):
        raise WeightMismatch(
            f"weights cover {sorted(weights.weights)} but members are {sorted(member_ids)}"
        )
    w = [weights.weights[m.model_id] for m in members]
    rows: dict = {}
    for key, first_row in members[0].rows.items():
        vec = tuple(
            math.fsum(w[i] * m.rows[key].probs[k] for i, m in enumerate(members))
            for k in range(NUM_TAGS)
        )
        rows[key] = PredictionRow(
            doc_id=first_row.doc_id,
            index=first_row.index,
            start=first_row.start,
            end=first_row.end,
            probs=vec,
        )
    return PredictionSet(model_id=WEIGHTED_ID, rows=rows)


def hard_vote(members: Sequence[PredictionSet]) -> LabelSequence:
    """Plurality over member argmax votes; ties break to the canonical order."""
    _check_members(members)
    rows: dict = {}
    for key, first_row in members[0].rows.items():
        tally = [0] * NUM_TAGS
        for m in members:
            tally[argmax_index(m.rows[key].probs)] += 1
        winner = max(range(NUM_TAGS), key=lambda i: (tally[i], -i))
        rows[key] = LabelRow(
            doc_id=first_row.doc_id,
            index=first_row.index,
            start=first_row.start,
            end=first_row.end,
            tag=TAGS[winner],
        )
    return LabelSequence(model_id=HARD_ID, rows=rows)
