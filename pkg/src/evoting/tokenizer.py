"""Tokenization, stop-word removal, and projection of gold spans to IOB2 tags.

Tokens are maximal alphanumeric runs; every punctuation character is its own
token; whitespace only separates. Offsets always point into the original
text, so stop-word removal re-indexes tokens but never moves them.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, replace
import re

from .errors import SchemaError
from .labels import BioTag, EventClass, begin_tag, inside_tag
from .standoff import AnnotatedDocument, GoldSpan

# Alphanumeric runs (underscore is punctuation here), then single punctuation chars.
TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")


@dataclass(frozen=True, slots=True)
class TokenSpan:
    doc_id: str
    index: int
    start: int
    end: int
    surface: str


@dataclass
class TokenizedDocument:
    doc_id: str
    tokens: list[TokenSpan]
    tags: list[BioTag] | None = None


@dataclass
class TokenizedCorpus:
    documents: list[TokenizedDocument]

    def doc(self, doc_id: str) -> TokenizedDocument | None:
        for d in self.documents:
            if d.doc_id == doc_id:
                return d
        return None

    def total_tokens(self) -> int:
        return sum(len(d.tokens) for d in self.documents)

    @property
    def has_gold(self) -> bool:
        return all(d.tags is not None for d in self.documents)


@dataclass
class ProjectionReport:
    """Tally of what happened while projecting gold spans onto tokens."""

    tokens: int = 0
    conflict_tokens: int = 0
    spans_total: int = 0
    spans_dropped: int = 0

    def merge(self, other: "ProjectionReport") -> None:
        self.tokens += other.tokens
        self.conflict_tokens += other.conflict_tokens
        self.spans_total += other.spans_total
        self.spans_dropped += other.spans_dropped


def tokenize(doc_id: str, text: str) -> list[TokenSpan]:
    return [
        TokenSpan(doc_id=doc_id, index=i, start=m.start(), end=m.end(), surface=m.group())
        for i, m in enumerate(TOKEN_RE.finditer(text))
    ]


def apply_stoplist(tokens: list[TokenSpan], stoplist: Iterable[str]) -> list[TokenSpan]:
    """Drop tokens whose surface is in the stoplist, case-insensitively.

    Survivors are re-indexed to a dense 0..n-1 range; offsets are untouched.
    """
    stop = {w.lower() for w in stoplist}
    kept = [t for t in tokens if t.surface.lower() not in stop]
    return [replace(t, index=i) for i, t in enumerate(kept)]


def project_gold_to_bio(
    tokens: list[TokenSpan],
    gold: Iterable[GoldSpan],
    report: ProjectionReport | None = None,
) -> list[BioTag]:
    """Assign one IOB2 tag per token from character-overlapping gold spans.

    A token overlapped by several spans goes to the span with the smallest
    (start, end); the output is always legal IOB2 even then, because a token
    opens a new chunk whenever its predecessor belongs to a different span.
    """
    gold = sorted(gold, key=lambda s: (s.start, s.end, s.label.value))
    tags: list[BioTag] = []
    assigned: list[GoldSpan | None] = []
    conflicts = 0
    winner_ids: set[int] = set()
    for pos, tok in enumerate(tokens):
        winner: GoldSpan | None = None
        overlapping = 0
        for span in gold:
            if span.start >= tok.end:
                break
            if span.end > tok.start:
                overlapping += 1
                if winner is None:
                    winner = span
        if overlapping > 1:
            conflicts += 1
        assigned.append(winner)
        if winner is None:
            tags.append(BioTag.O)
            continue
        winner_ids.add(id(winner))
        cls: EventClass = winner.label
        if pos > 0 and assigned[pos - 1] is winner:
            tags.append(inside_tag(cls))
        else:
            tags.append(begin_tag(cls))
    if report is not None:
        local = ProjectionReport(
            tokens=len(tokens),
            conflict_tokens=conflicts,
            spans_total=len(gold),
            spans_dropped=sum(1 for s in gold if id(s) not in winner_ids),
        )
        report.merge(local)
    return tags


def tag_corpus(
    corpus: list[AnnotatedDocument],
    stoplist: Iterable[str] | None = None,
) -> tuple[TokenizedCorpus, ProjectionReport]:
    """Tokenize every document and project its gold spans to tags."""
    report = ProjectionReport()
    docs = []
    stop = list(stoplist) if stoplist is not None else None
    for doc in corpus:
        tokens = tokenize(doc.doc_id, doc.document.text)
        if stop:
            tokens = apply_stoplist(tokens, stop)
        tags = project_gold_to_bio(tokens, doc.gold, report=report)
        docs.append(TokenizedDocument(doc_id=doc.doc_id, tokens=tokens, tags=tags))
    return TokenizedCorpus(documents=docs), report


def tokens_to_records(corpus: TokenizedCorpus) -> list[dict]:
    out = []
    for doc in corpus.documents:
        for i, tok in enumerate(doc.tokens):
            rec = {
                "doc_id": tok.doc_id,
                "index": tok.index,
                "start": tok.start,
                "end": tok.end,
                "surface": tok.surface,
            }
            if doc.tags is not None:
                rec["gold_tag"] = doc.tags[i].value
            out.append(rec)
    return out


def tokens_from_records(records) -> TokenizedCorpus:
    docs: dict[str, TokenizedDocument] = {}
    for rec in records:
        try:
            tok = TokenSpan(
                doc_id=rec["doc_id"],
                index=rec["index"],
                start=rec["start"],
                end=rec["end"],
                surface=rec["surface"],
            )
        except KeyError as exc:
            raise SchemaError(f"token record missing field {exc}") from None
        doc = docs.get(tok.doc_id)
        if doc is None:
            doc = docs[tok.doc_id] = TokenizedDocument(doc_id=tok.doc_id, tokens=[], tags=[])
        doc.tokens.append(tok)
        if "gold_tag" in rec:
            doc.tags.append(BioTag(rec["gold_tag"]))
    for doc in docs.values():
        order = sorted(range(len(doc.tokens)), key=lambda i: doc.tokens[i].index)
        doc.tokens = [doc.tokens[i] for i in order]
        if doc.tags and len(doc.tags) == len(doc.tokens):
            doc.tags = [doc.tags[i] for i in order]
        else:
            doc.tags = None
    return TokenizedCorpus(documents=list(docs.values()))
