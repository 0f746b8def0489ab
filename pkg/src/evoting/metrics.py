"""Span matching and precision/recall/F reporting.

Matching is one-to-one: each gold span consumes at most one prediction and
vice versa. Pairs are committed greedily in order of (gold start, gold end,
prediction start); when a gold span has both an exact-offset candidate and
mere overlaps, the exact one wins. Strict mode requires identical offsets and
label; lenient mode requires intersecting intervals and the same label.

Unmatched predictions are false positives, unmatched gold spans are false
negatives. Micro metrics pool counts over classes before the P/R/F
arithmetic; macro metrics average per-class values over a fixed class
universe, where an absent class contributes zeros.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .decoding import PredictedSpan, collapse_to_medication
from .errors import ConfigError, UnsortedInput
from .labels import DRUG_LABEL, EVENT_CLASSES, label_sort_key
from .standoff import AnnotatedDocument
from .tokenizer import TokenizedCorpus

EVENT_UNIVERSE = tuple(cls.value for cls in EVENT_CLASSES)
MEDICATION_UNIVERSE = (DRUG_LABEL,)

TASKS = ("events", "medication")


class MatchMode(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass
class MatchCounts:
    classes: tuple[str, ...]
    tp: dict[str, int]
    fp: dict[str, int]
    fn: dict[str, int]

    @classmethod
    def zero(cls, classes: Iterable[str]) -> "MatchCounts":
        classes = tuple(classes)
        return cls(
            classes=classes,
            tp={c: 0 for c in classes},
            fp={c: 0 for c in classes},
            fn={c: 0 for c in classes},
        )

    def update(self, other: "MatchCounts") -> None:
        for c in other.classes:
            if c not in self.tp:
                self.classes = self.classes + (c,)
                self.tp[c] = self.fp[c] = self.fn[c] = 0
            self.tp[c] += other.tp[c]
            self.fp[c] += other.fp[c]
            self.fn[c] += other.fn[c]

    def pooled(self) -> tuple[int, int, int]:
        return (sum(self.tp.values()), sum(self.fp.values()), sum(self.fn.values()))


def _require_sorted(spans: Sequence, side: str) -> None:
    for prev, cur in zip(spans, spans[1:]):
        if (cur.start, cur.end) < (prev.start, prev.end):
            raise UnsortedInput(f"{side} spans are not sorted by (start, end)")


def _overlaps(a, b) -> bool:
    return max(a.start, b.start) < min(a.end, b.end)


def match_spans(
    gold: Sequence,
    pred: Sequence,
    mode: MatchMode,
    classes: Iterable[str] | None = None,
) -> MatchCounts:
    """Count per-class TP/FP/FN for one document's spans.

    Both sides must be sorted by (start, end). Any span-shaped value works:
    only start, end, and label are read.
    """
    _require_sorted(gold, "gold")
    _require_sorted(pred, "predicted")
    if classes is None:
        observed = {str(s.label) for s in gold} | {str(s.label) for s in pred}
        classes = sorted(observed, key=label_sort_key)
    counts = MatchCounts.zero(classes)
    for s in gold:
        if str(s.label) not in counts.tp:
            raise ConfigError(f"gold label {s.label!r} outside class universe {counts.classes}")
    for s in pred:
        if str(s.label) not in counts.tp:
            raise ConfigError(f"predicted label {s.label!r} outside class universe {counts.classes}")

    used = [False] * len(pred)
    for g in gold:
        g_label = str(g.label)
        exact = None
        overlap = None
        for j, p in enumerate(pred):
            if used[j] or str(p.label) != g_label:
                continue
            if p.start == g.start and p.end == g.end:
                exact = j
                break
            if mode is MatchMode.LENIENT and overlap is None and _overlaps(g, p):
                overlap = j
        chosen = exact if exact is not None else (overlap if mode is MatchMode.LENIENT else None)
        if chosen is None:
            counts.fn[g_label] += 1
        else:
            used[chosen] = True
            counts.tp[g_label] += 1
    for j, p in enumerate(pred):
        if not used[j]:
            counts.fp[str(p.label)] += 1
    return counts


def fscore(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F from raw counts; every 0/0 is defined as 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return (precision, recall, fscore(precision, recall))


def micro_metrics(counts: MatchCounts) -> tuple[float, float, float]:
    return prf(*counts.pooled())


def macro_metrics(counts: MatchCounts) -> tuple[float, float, float]:
    """Unweighted mean of per-class P/R/F over the fixed class universe."""
    n = len(counts.classes)
    if n == 0:
        return (0.0, 0.0, 0.0)
    per = [prf(counts.tp[c], counts.fp[c], counts.fn[c]) for c in counts.classes]
    return (
        sum(p for p, _, _ in per) / n,
        sum(r for _, r, _ in per) / n,
        sum(f for _, _, f in per) / n,
    )


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f: float


@dataclass(frozen=True)
class MetricsReport:
    task: str
    mode: str
    per_class: dict[str, ClassMetrics]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]

    @classmethod
    def from_counts(cls, task: str, mode: MatchMode, counts: MatchCounts) -> "MetricsReport":
        per_class = {}
        for c in counts.classes:
            tp, fp, fn = counts.tp[c], counts.fp[c], counts.fn[c]
            p, r, f = prf(tp, fp, fn)
            per_class[c] = ClassMetrics(tp=tp, fp=fp, fn=fn, precision=p, recall=r, f=f)
        return cls(
            task=task,
            mode=mode.value,
            per_class=per_class,
            micro=micro_metrics(counts),
            macro=macro_metrics(counts),
        )

    def to_record(self) -> dict:
        return {
            "task": self.task,
            "mode": self.mode,
            "classes": {
                c: {"tp": m.tp, "fp": m.fp, "fn": m.fn, "precision": m.precision, "recall": m.recall, "f": m.f}
                for c, m in self.per_class.items()
            },
            "micro": {"precision": self.micro[0], "recall": self.micro[1], "f": self.micro[2]},
            "macro": {"precision": self.macro[0], "recall": self.macro[1], "f": self.macro[2]},
        }

    @staticmethod
    def from_record(rec: dict) -> "MetricsReport":
        per_class = {
            c: ClassMetrics(tp=m["tp"], fp=m["fp"], fn=m["fn"], precision=m["precision"], recall=m["recall"], f=m["f"])
            for c, m in rec["classes"].items()
        }
        return MetricsReport(
            task=rec["task"],
            mode=rec["mode"],
            per_class=per_class,
            micro=(rec["micro"]["precision"], rec["micro"]["recall"], rec["micro"]["f"]),
            macro=(rec["macro"]["precision"], rec["macro"]["recall"], rec["macro"]["f"]),
        )

    def table(self) -> str:
        width = max([len(c) for c in self.per_class] + [len("macro")]) + 2
        lines = [f"task: {self.task}  mode: {self.mode}"]
        header = f"{'class':<{width}}{'tp':>6}{'fp':>6}{'fn':>6}{'precision':>11}{'recall':>9}{'f':>9}"
        lines.append(header)
        for c, m in self.per_class.items():
            lines.append(
                f"{c:<{width}}{m.tp:>6}{m.fp:>6}{m.fn:>6}{m.precision:>11.4f}{m.recall:>9.4f}{m.f:>9.4f}"
            )
        tp, fp, fn = (
            sum(m.tp for m in self.per_class.values()),
            sum(m.fp for m in self.per_class.values()),
            sum(m.fn for m in self.per_class.values()),
        )
        lines.append(
            f"{'micro':<{width}}{tp:>6}{fp:>6}{fn:>6}{self.micro[0]:>11.4f}{self.micro[1]:>9.4f}{self.micro[2]:>9.4f}"
        )
        lines.append(
            f"{'macro':<{width}}{'':>6}{'':>6}{'':>6}{self.macro[0]:>11.4f}{self.macro[1]:>9.4f}{self.macro[2]:>9.4f}"
        )
        return "\n".join(lines)


def evaluate(
    corpus: list[AnnotatedDocument],
    predicted: Iterable[PredictedSpan],
    task: str = "events",
    tokens: TokenizedCorpus | None = None,
) -> tuple[MetricsReport, MetricsReport]:
    """Score predicted spans against a gold corpus; returns (strict, lenient).

    For the medication task both sides are collapsed to merged Drug spans
    first. Predictions for documents outside the corpus count as false
    positives: they match nothing.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}, expected one of {TASKS}")
    universe = EVENT_UNIVERSE if task == "events" else MEDICATION_UNIVERSE
    by_doc: dict[str, list[PredictedSpan]] = {}
    for span in predicted:
        by_doc.setdefault(span.doc_id, []).append(span)
    totals = {mode: MatchCounts.zero(universe) for mode in MatchMode}
    known = set()
    for doc in corpus:
        known.add(doc.doc_id)
        gold: Sequence = doc.gold
        pred = sorted(by_doc.get(doc.doc_id, []), key=lambda s: (s.start, s.end, label_sort_key(s.label)))
        if task == "medication":
            doc_tokens = None
            if tokens is not None:
                tokenized = tokens.doc(doc.doc_id)
                doc_tokens = tokenized.tokens if tokenized is not None else None
            gold = collapse_to_medication(gold, doc_id=doc.doc_id, tokens=doc_tokens)
            pred = collapse_to_medication(pred, doc_id=doc.doc_id, tokens=doc_tokens)
        for mode in MatchMode:
            totals[mode].update(match_spans(gold, pred, mode, classes=universe))
    for doc_id in sorted(by_doc):
        if doc_id in known:
            continue
        stray = sorted(by_doc[doc_id], key=lambda s: (s.start, s.end, label_sort_key(s.label)))
        if task == "medication":
            stray = collapse_to_medication(stray, doc_id=doc_id)
        for mode in MatchMode:
            totals[mode].update(match_spans([], stray, mode, classes=universe))
    return (
        MetricsReport.from_counts(task, MatchMode.STRICT, totals[MatchMode.STRICT]),
        MetricsReport.from_counts(task, MatchMode.LENIENT, totals[MatchMode.LENIENT]),
    )
