from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evoting import (
    AnnotatedDocument,
    PredictionRow,
    PredictionSet,
    TokenizedCorpus,
    parse_document,
    tag_corpus,
)
from evoting.labels import NUM_TAGS, TAG_INDEX

# Text/annotation pairs covering all three event classes, including one
# document with two events and an intervening punctuation token.
TOY_DOCS = [
    (
        "note-01",
        "He currently using metronidazole pill longer",
        "T1\tDisposition 19 32\tmetronidazole\n",
    ),
    (
        "note-02",
        "insulin glargine started today",
        "T1\tNoDisposition 0 16\tinsulin glargine\n",
    ),
    (
        "note-03",
        "may continue aspirin daily",
        "T1\tUndetermined 13 20\taspirin\n",
    ),
    (
        "note-04",
        "stopped lisinopril , started amlodipine",
        "T1\tDisposition 8 18\tlisinopril\nT2\tDisposition 29 39\tamlodipine\n",
    ),
]


def build_toy_corpus() -> list[AnnotatedDocument]:
    return [parse_document(text, ann, doc_id=doc_id) for doc_id, text, ann in TOY_DOCS]


@pytest.fixture
def toy_corpus() -> list[AnnotatedDocument]:
    return build_toy_corpus()


@pytest.fixture
def toy_tokenized(toy_corpus) -> TokenizedCorpus:
    tokenized, _ = tag_corpus(toy_corpus)
    return tokenized


def spread_vector(index: int, confidence: float) -> tuple[float, ...]:
    """A 7-way vector with `confidence` at `index` and the rest spread evenly."""
    rest = (1.0 - confidence) / (NUM_TAGS - 1)
    return tuple(confidence if k == index else rest for k in range(NUM_TAGS))


def predictions_from_tags(
    tokenized: TokenizedCorpus,
    model_id: str,
    confidence: float = 0.9,
    flips: dict[tuple[str, int], int] | None = None,
) -> PredictionSet:
    """Build a PredictionSet agreeing with the gold tags, except where flipped."""
    flips = flips or {}
    rows = {}
    for doc in tokenized.documents:
        assert doc.tags is not None
        for pos, tok in enumerate(doc.tokens):
            key = (tok.doc_id, tok.index)
            target = flips.get(key, TAG_INDEX[doc.tags[pos]])
            rows[key] = PredictionRow(
                doc_id=tok.doc_id,
                index=tok.index,
                start=tok.start,
                end=tok.end,
                probs=spread_vector(target, confidence),
            )
    return PredictionSet(model_id=model_id, rows=rows)


def write_toy_corpus_files(base: Path) -> tuple[Path, Path]:
    text_dir = base / "text"
    ann_dir = base / "ann"
    text_dir.mkdir(parents=True, exist_ok=True)
    ann_dir.mkdir(parents=True, exist_ok=True)
    for doc_id, text, ann in TOY_DOCS:
        (text_dir / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        (ann_dir / f"{doc_id}.ann").write_text(ann, encoding="utf-8")
    return text_dir, ann_dir
