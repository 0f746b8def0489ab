"""Standoff corpus parsing and serialization.

A corpus is a directory of document pairs sharing a basename: ``<id>.txt``
holds the note text, ``<id>.ann`` holds annotations. Entity lines follow

    T<id><TAB><Label> <start> <end><TAB><surface>

with 0-based character offsets into the decoded text, end exclusive. Lines
not starting with ``T`` (relations, events, attributes) are ignored. The
surface field must equal the text slice; that redundancy is what makes a
corpus checkable at the boundary.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DataError,
    MalformedLine,
    OffsetOutOfRange,
    SurfaceMismatch,
    UnknownLabel,
    Violation,
)
from .labels import EventClass, label_sort_key

log = logging.getLogger(__name__)

ENTITY_RE = re.compile(r"^(T\S+)\t(\S+) (\d+) (\d+)\t(.*)$")


@dataclass(frozen=True, slots=True)
class Document:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")


@dataclass(frozen=True, slots=True)
class GoldSpan:
    start: int
    end: int
    label: EventClass
    surface: str

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span offsets ({self.start}, {self.end})")


@dataclass(frozen=True)
class AnnotatedDocument:
    document: Document
    gold: tuple[GoldSpan, ...]

    @property
    def doc_id(self) -> str:
        return self.document.doc_id


def _span_key(span: GoldSpan) -> tuple:
    return (span.start, span.end, label_sort_key(span.label.value))


def parse_document(text_blob: str, annotation_blob: str, doc_id: str = "doc") -> AnnotatedDocument:
    """Parse one text/annotation pair. Gold spans come out sorted by offsets."""
    spans: list[GoldSpan] = []
    for lineno, line in enumerate(annotation_blob.splitlines(), start=1):
        if not line.startswith("T"):
            continue
        m = ENTITY_RE.match(line)
        if m is None:
            raise MalformedLine(f"{doc_id}:{lineno}: unparseable entity line {line!r}")
        _, label_str, start_str, end_str, surface = m.groups()
        try:
            label = EventClass(label_str)
        except ValueError:
            raise UnknownLabel(f"{doc_id}:{lineno}: unknown label {label_str!r}") from None
        start, end = int(start_str), int(end_str)
        if start >= end or end > len(text_blob):
            raise OffsetOutOfRange(
                f"{doc_id}:{lineno}: offsets ({start}, {end}) invalid for text of length {len(text_blob)}"
            )
        actual = text_blob[start:end]
        if surface != actual:
            raise SurfaceMismatch(
                f"{doc_id}:{lineno}: annotated surface {surface!r} != text slice {actual!r}"
            )
        spans.append(GoldSpan(start=start, end=end, label=label, surface=surface))
    spans.sort(key=_span_key)
    return AnnotatedDocument(document=Document(doc_id=doc_id, text=text_blob), gold=tuple(spans))


def serialize_annotations(doc: AnnotatedDocument) -> str:
    """Render gold spans back to entity lines. Entity ids are reassigned."""
    lines = []
    for i, span in enumerate(doc.gold, start=1):
        lines.append(f"T{i}\t{span.label.value} {span.start} {span.end}\t{span.surface}\n")
    return "".join(lines)


def validate_corpus(corpus: list[AnnotatedDocument]) -> list[Violation]:
    """Report duplicate doc ids, overlapping gold spans, and surface mismatches."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for doc in corpus:
        if doc.doc_id in seen:
            violations.append(Violation("duplicate_id", doc.doc_id, "duplicate document id"))
        seen.add(doc.doc_id)
        max_end = -1
        for span in doc.gold:
            if span.start < max_end:
                violations.append(
                    Violation(
                        "overlap",
                        doc.doc_id,
                        f"gold span ({span.start}, {span.end}) overlaps an earlier span",
                    )
                )
            max_end = max(max_end, span.end)
            actual = doc.document.text[span.start : span.end]
            if span.surface != actual:
                violations.append(
                    Violation(
                        "surface_mismatch",
                        doc.doc_id,
                        f"span ({span.start}, {span.end}) surface {span.surface!r} != text slice {actual!r}",
                    )
                )
    return violations


def _read_text(path: Path) -> str:
    # newline="" keeps \r\n intact so offsets match the annotation tool's view
    with path.open("r", encoding="utf-8", newline="") as fh:
        return fh.read()


def load_corpus_dir(text_dir: str | Path, ann_dir: str | Path, workers: int | None = None) -> list[AnnotatedDocument]:
    """Load all ``*.txt``/``*.ann`` pairs, sorted by document id.

    A text file without a companion annotation file yields an empty gold set.
    An annotation file without text is an error: its offsets reference nothing.
    """
    text_dir, ann_dir = Path(text_dir), Path(ann_dir)
    text_files = sorted(text_dir.glob("*.txt"))
    if not text_files:
        raise DataError(f"no .txt files found in {text_dir}")
    known = {p.stem for p in text_files}
    for ann in sorted(ann_dir.glob("*.ann")):
        if ann.stem not in known:
            raise DataError(f"{ann}: annotation file has no companion text file")

    def load_one(txt_path: Path) -> AnnotatedDocument:
        ann_path = ann_dir / (txt_path.stem + ".ann")
        if ann_path.exists():
            ann_blob = _read_text(ann_path)
        else:
            log.info("no annotation file for %s, assuming empty gold", txt_path.stem)
            ann_blob = ""
        return parse_document(_read_text(txt_path), ann_blob, doc_id=txt_path.stem)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            docs = list(pool.map(load_one, text_files))
    else:
        docs = [load_one(p) for p in text_files]
    return docs


def corpus_to_records(corpus: list[AnnotatedDocument]) -> list[dict]:
    out = []
    for doc in corpus:
        out.append(
            {
                "doc_id": doc.doc_id,
                "text": doc.document.text,
                "gold": [
                    {"start": s.start, "end": s.end, "label": s.label.value, "surface": s.surface}
                    for s in doc.gold
                ],
            }
        )
    return out


def corpus_from_records(records) -> list[AnnotatedDocument]:
    docs = []
    for rec in records:
        spans = tuple(
            GoldSpan(start=g["start"], end=g["end"], label=EventClass(g["label"]), surface=g["surface"])
            for g in rec["gold"]
        )
        docs.append(AnnotatedDocument(document=Document(rec["doc_id"], rec["text"]), gold=spans))
    return docs
