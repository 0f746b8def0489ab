"""Per-token prediction files and their in-memory forms.

A prediction file is line-delimited JSON. The first line is a header naming
the model and the tag order; every other line is one token row:

    {"kind": "token_probs", "model_id": "...", "tags": [...7 tags...]}
    {"doc_id": "...", "token_index": 0, "start": 0, "end": 2, "probs": [...7 floats...]}

Label files are identical except the header kind is ``token_labels`` and rows
carry ``"tag"`` instead of ``"probs"``. The tag order in the header is fixed:
silent index permutation between models is the most dangerous failure mode,
so a permuted header is rejected rather than remapped.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateRow, ProbabilityError, SchemaError, Violation
from .labels import NUM_TAGS, TAGS, BioTag
from .records import read_jsonl, write_jsonl
from .tokenizer import TokenizedCorpus

PROB_TOLERANCE = 1e-6

RowKey = tuple[str, int]


@dataclass(frozen=True, slots=True)
class PredictionRow:
    doc_id: str
    index: int
    start: int
    end: int
    probs: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class LabelRow:
    doc_id: str
    index: int
    start: int
    end: int
    tag: BioTag


@dataclass
class PredictionSet:
    """One model's probability vector per token, keyed by (doc_id, index)."""

    model_id: str
    rows: dict[RowKey, PredictionRow]


@dataclass
class LabelSequence:
    """One tag per token, same keying as PredictionSet."""

    model_id: str
    rows: dict[RowKey, LabelRow]


def normalize_vector(probs: Sequence[float], context: str = "") -> tuple[float, ...]:
    """Validate and renormalize a probability vector.

    Vectors whose sum is off by more than the tolerance are rejected. After
    renormalization any float residual is pushed onto a maximal entry, chosen
    so exact argmax ties keep their canonical winner; the result sums to 1.0
    closely enough that reloading it is a bitwise no-op.
    """
    if len(probs) != NUM_TAGS:
        raise SchemaError(f"{context}: expected {NUM_TAGS} probabilities, got {len(probs)}")
    values = [float(p) for p in probs]
    for p in values:
        if not math.isfinite(p) or p < 0.0:
            raise ProbabilityError(f"{context}: invalid probability {p!r}")
    total = math.fsum(values)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ProbabilityError(f"{context}: probabilities sum to {total!r}, outside tolerance")
    if total != 1.0:
        values = [p / total for p in values]
    residual = 1.0 - math.fsum(values)
    if residual != 0.0:
        peak = max(values)
        if residual > 0.0:
            idx = values.index(peak)
        else:
            idx = len(values) - 1 - values[::-1].index(peak)
        values[idx] += residual
    return tuple(values)


def _sorted_rows(rows: dict) -> dict:
    return {key: rows[key] for key in sorted(rows)}


def _read_header(path: str | Path, records, expected_kind: str) -> str:
    header = next(records, None)
    if header is None:
        raise SchemaError(f"{path}: empty file, expected a header record")
    kind = header.get("kind", expected_kind)
    if kind != expected_kind:
        raise SchemaError(f"{path}: header kind {kind!r}, expected {expected_kind!r}")
    model_id = header.get("model_id")
    if not isinstance(model_id, str) or not model_id:
        raise SchemaError(f"{path}: header missing a non-empty model_id")
    tags = header.get("tags")
    if tags != [t.value for t in TAGS]:
        raise SchemaError(f"{path}: header tag order {tags!r} does not match the canonical tag set")
    return model_id


def _row_fields(path, lineno: int, rec: dict) -> tuple[str, int, int, int]:
    try:
        doc_id, index, start, end = rec["doc_id"], rec["token_index"], rec["start"], rec["end"]
    except KeyError as exc:
        raise SchemaError(f"{path}:{lineno}: row missing field {exc}") from None
    if not isinstance(doc_id, str) or not doc_id:
        raise SchemaError(f"{path}:{lineno}: doc_id must be a non-empty string")
    for name, value in (("token_index", index), ("start", start), ("end", end)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"{path}:{lineno}: {name} must be an integer")
    if index < 0 or start < 0 or end <= start:
        raise SchemaError(f"{path}:{lineno}: bad token geometry (index={index}, start={start}, end={end})")
    return doc_id, index, start, end


def load_predictions(path: str | Path) -> PredictionSet:
    records = read_jsonl(path)
    model_id = _read_header(path, records, "token_probs")
    rows: dict[RowKey, PredictionRow] = {}
    for lineno, rec in enumerate(records, start=2):
        doc_id, index, start, end = _row_fields(path, lineno, rec)
        probs = rec.get("probs")
        if not isinstance(probs, list):
            raise SchemaError(f"{path}:{lineno}: row has no probs list")
        vector = normalize_vector(probs, context=f"{path}:{lineno}")
        key = (doc_id, index)
        if key in rows:
            raise DuplicateRow(f"{path}:{lineno}: duplicate row for {key}")
        rows[key] = PredictionRow(doc_id=doc_id, index=index, start=start, end=end, probs=vector)
    return PredictionSet(model_id=model_id, rows=_sorted_rows(rows))


def save_predictions(pred: PredictionSet, path: str | Path) -> None:
    header = {"kind": "token_probs", "model_id": pred.model_id, "tags": [t.value for t in TAGS]}

    def rows():
        yield header
        for key in sorted(pred.rows):
            row = pred.rows[key]
            yield {
                "doc_id": row.doc_id,
                "token_index": row.index,
                "start": row.start,
                "end": row.end,
                "probs": list(row.probs),
            }

    write_jsonl(path, rows())


def load_labels(path: str | Path) -> LabelSequence:
    records = read_jsonl(path)
    model_id = _read_header(path, records, "token_labels")
    rows: dict[RowKey, LabelRow] = {}
    for lineno, rec in enumerate(records, start=2):
        doc_id, index, start, end = _row_fields(path, lineno, rec)
        tag_str = rec.get("tag")
        try:
            tag = BioTag(tag_str)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: unknown tag {tag_str!r}") from None
        key = (doc_id, index)
        if key in rows:
            raise DuplicateRow(f"{path}:{lineno}: duplicate row for {key}")
        rows[key] = LabelRow(doc_id=doc_id, index=index, start=start, end=end, tag=tag)
    return LabelSequence(model_id=model_id, rows=_sorted_rows(rows))


def save_labels(seq: LabelSequence, path: str | Path) -> None:
    header = {"kind": "token_labels", "model_id": seq.model_id, "tags": [t.value for t in TAGS]}

    def rows():
        yield header
        for key in sorted(seq.rows):
            row = seq.rows[key]
            yield {
                "doc_id": row.doc_id,
                "token_index": row.index,
                "start": row.start,
                "end": row.end,
                "tag": row.tag.value,
            }

    write_jsonl(path, rows())


def argmax_index(probs: Sequence[float]) -> int:
    """Index of the largest entry; ties go to the lowest (canonical) index."""
    return probs.index(max(probs))


def argmax_labels(pred: PredictionSet) -> LabelSequence:
    rows = {
        key: LabelRow(
            doc_id=row.doc_id,
            index=row.index,
            start=row.start,
            end=row.end,
            tag=TAGS[argmax_index(row.probs)],
        )
        for key, row in pred.rows.items()
    }
    return LabelSequence(model_id=pred.model_id, rows=rows)


def validate_alignment(pred: PredictionSet | LabelSequence, corpus: TokenizedCorpus) -> list[Violation]:
    """Check that rows and corpus tokens correspond one to one.

    Returns violations: missing_row for uncovered tokens, unknown_document and
    unknown_token for rows pointing outside the corpus, offset_mismatch when a
    covered token disagrees on offsets. Matched rows plus missing rows always
    account for every corpus token.
    """
    violations: list[Violation] = []
    matched: set[RowKey] = set()
    doc_ids = {d.doc_id for d in corpus.documents}
    for doc in corpus.documents:
        for tok in doc.tokens:
            key = (tok.doc_id, tok.index)
            row = pred.rows.get(key)
            if row is None:
                violations.append(
                    Violation("missing_row", tok.doc_id, f"no row for token {tok.index}")
                )
                continue
            matched.add(key)
            if row.start != tok.start or row.end != tok.end:
                violations.append(
                    Violation(
                        "offset_mismatch",
                        tok.doc_id,
                        f"token {tok.index}: row offsets ({row.start}, {row.end}) != ({tok.start}, {tok.end})",
                    )
                )
    for key in sorted(pred.rows):
        if key in matched:
            continue
        doc_id, index = key
        if doc_id not in doc_ids:
            violations.append(Violation("unknown_document", doc_id, f"row for unknown document (token {index})"))
        else:
            violations.append(Violation("unknown_token", doc_id, f"row for unknown token index {index}"))
    return violations
