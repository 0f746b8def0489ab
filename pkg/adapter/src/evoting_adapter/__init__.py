"""Checkpoint-to-prediction-file adapter for the voting toolkit.

Runs any fine-tuned token-classification checkpoint over a word-token
export and writes per-token tag-probability vectors in the line-delimited
interchange format the toolkit ingests.
"""

from .errors import AdapterError, AlignmentError, ConfigError, LabelMapError, TokenFileError
from .export import (
    CANONICAL_TAGS,
    POOLING_RULES,
    AdapterConfig,
    WordToken,
    export_predictions,
    load_word_tokens,
    resolve_label_order,
)

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "AlignmentError",
    "CANONICAL_TAGS",
    "ConfigError",
    "LabelMapError",
    "POOLING_RULES",
    "TokenFileError",
    "WordToken",
    "export_predictions",
    "load_word_tokens",
    "resolve_label_order",
]

__version__ = "0.1.0"
