"""Ensemble voting, span decoding, and evaluation for medication-event predictions."""

__version__ = "0.1.0"

from .calibration import CalibrationBin, CalibrationReport, WeightVector, compute_ece, ece_weights
from .decoding import PredictedSpan, collapse_to_medication, decode_bio, spans_to_standoff
from .ensemble import EnsembleConfig, hard_vote, soft_vote, weighted_vote
from .errors import ConfigError, DataError, EvotingError, Violation
from .labels import DRUG_LABEL, EVENT_CLASSES, NUM_TAGS, TAGS, BioTag, EventClass
from .metrics import (
    MatchCounts,
    MatchMode,
    MetricsReport,
    evaluate,
    fscore,
    macro_metrics,
    match_spans,
    micro_metrics,
    prf,
)
from .predictions import (
    LabelRow,
    LabelSequence,
    PredictionRow,
    PredictionSet,
    argmax_labels,
    load_labels,
    load_predictions,
    normalize_vector,
    save_labels,
    save_predictions,
    validate_alignment,
)
from .standoff import (
    AnnotatedDocument,
    Document,
    GoldSpan,
    load_corpus_dir,
    parse_document,
    serialize_annotations,
    validate_corpus,
)
from .tokenizer import (
    ProjectionReport,
    TokenSpan,
    TokenizedCorpus,
    TokenizedDocument,
    apply_stoplist,
    project_gold_to_bio,
    tag_corpus,
    tokenize,
)

__all__ = [
    "__version__",
    "AnnotatedDocument",
    "BioTag",
    "CalibrationBin",
    "CalibrationReport",
    "ConfigError",
    "DataError",
    "Document",
    "DRUG_LABEL",
    "EnsembleConfig",
    "EVENT_CLASSES",
    "EventClass",
    "EvotingError",
    "GoldSpan",
    "LabelRow",
    "LabelSequence",
    "MatchCounts",
    "MatchMode",
    "MetricsReport",
    "NUM_TAGS",
    "PredictedSpan",
    "PredictionRow",
    "PredictionSet",
    "ProjectionReport",
    "TAGS",
    "TokenSpan",
    "TokenizedCorpus",
    "TokenizedDocument",
    "Violation",
    "WeightVector",
    "apply_stoplist",
    "argmax_labels",
    "collapse_to_medication",
    "compute_ece",
    "decode_bio",
    "ece_weights",
    "evaluate",
    "fscore",
    "hard_vote",
    "load_corpus_dir",
    "load_labels",
    "load_predictions",
    "macro_metrics",
    "match_spans",
    "micro_metrics",
    "normalize_vector",
    "parse_document",
    "prf",
    "project_gold_to_bio",
    "save_labels",
    "save_predictions",
    "serialize_annotations",
    "soft_vote",
    "spans_to_standoff",
    "tag_corpus",
    "tokenize",
    "validate_alignment",
    "validate_corpus",
    "weighted_vote",
]
