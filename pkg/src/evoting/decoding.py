"""Span decoding from IOB2 tag sequences, and collapse to medication spans.

Decoding repairs illegal sequences instead of rejecting them: an I-X with no
open X chunk opens one, exactly as if it had been a B-X. A span's offsets are
the first token's start and the last token's end, so spans never include
leading or trailing separator text.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections.abc import Sequence

from .errors import LengthMismatch, UnsortedInput
from .labels import DRUG_LABEL, BioTag
from .standoff import GoldSpan
from .tokenizer import TokenSpan


@dataclass(frozen=True, slots=True)
class PredictedSpan:
    doc_id: str
    start: int
    end: int
    label: str

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span offsets ({self.start}, {self.end})")


def decode_bio(tokens: Sequence[TokenSpan], tags: Sequence[BioTag]) -> list[PredictedSpan]:
    """Turn one document's tag sequence into sorted, non-overlapping spans."""
    if len(tokens) != len(tags):
        raise LengthMismatch(f"{len(tokens)} tokens but {len(tags)} tags")
    for prev, tok in zip(tokens, tokens[1:]):
        if (tok.start, tok.end) < (prev.start, prev.end) or prev.end > tok.start:
            raise UnsortedInput(f"tokens out of order at index {tok.index}")
    spans: list[PredictedSpan] = []
    open_cls = None
    open_start = 0
    open_end = 0

    def close() -> None:
        nonlocal open_cls
        if open_cls is not None:
            spans.append(
                PredictedSpan(
                    doc_id=tokens[0].doc_id, start=open_start, end=open_end, label=open_cls.value
                )
            )
            open_cls = None

    for tok, tag in zip(tokens, tags):
        cls = tag.event_class
        if cls is None:
            close()
        elif tag.is_begin or open_cls is not cls:
            # B-X always opens; an orphan or class-switching I-X is repaired to B-X
            close()
            open_cls = cls
            open_start = tok.start
            open_end = tok.end
        else:
            open_end = tok.end
    close()
    return spans


def _covering_token_run(span, tokens: Sequence[TokenSpan]) -> tuple[int, int] | None:
    """Positions of the first and last token a span overlaps, if any."""
    first = last = None
    for pos, tok in enumerate(tokens):
        if tok.start >= span.end:
            break
        if tok.end > span.start:
            if first is None:
                first = pos
            last = pos
    if first is None:
        return None
    return first, last


def collapse_to_medication(
    spans: Sequence[PredictedSpan | GoldSpan],
    doc_id: str | None = None,
    tokens: Sequence[TokenSpan] | None = None,
) -> list[PredictedSpan]:
    """Relabel every span as Drug and merge spans that form one mention.

    Spans merge when their intervals overlap or touch. Given the document's
    tokens, spans separated only by whitespace also merge, because "adjacent"
    means no intervening token: a mention split by class disagreement is still
    one mention. Character coverage is never lost, only bridged.
    """
    if not spans:
        return []
    if doc_id is None:
        doc_id = spans[0].doc_id  # type: ignore[union-attr]
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    runs = None
    if tokens is not None:
        runs = [_covering_token_run(s, tokens) for s in ordered]
    merged: list[PredictedSpan] = []
    cur_start, cur_end = ordered[0].start, ordered[0].end
    cur_run = runs[0] if runs is not None else None
    for pos in range(1, len(ordered)):
        span = ordered[pos]
        run = runs[pos] if runs is not None else None
        touches = span.start <= cur_end
        adjacent_tokens = (
            cur_run is not None and run is not None and run[0] <= cur_run[1] + 1
        )
        if touches or adjacent_tokens:
            cur_end = max(cur_end, span.end)
            if cur_run is not None and run is not None:
                cur_run = (cur_run[0], max(cur_run[1], run[1]))
            elif run is not None:
                cur_run = run
        else:
            merged.append(PredictedSpan(doc_id=doc_id, start=cur_start, end=cur_end, label=DRUG_LABEL))
            cur_start, cur_end, cur_run = span.start, span.end, run
    merged.append(PredictedSpan(doc_id=doc_id, start=cur_start, end=cur_end, label=DRUG_LABEL))
    return merged


def spans_to_standoff(spans: Sequence[PredictedSpan], text: str) -> str:
    """Serialize decoded spans as standoff entity lines for easy diffing."""
    lines = []
    for i, span in enumerate(spans, start=1):
        surface = text[span.start : span.end]
        lines.append(f"T{i}\t{span.label} {span.start} {span.end}\t{surface}\n")
    return "".join(lines)
