"""Exception hierarchy for the adapter.

ConfigError (and subclasses) means the invocation is wrong; everything else
under AdapterError means the inputs are. The CLI maps the former to exit
code 2 and the latter to exit code 1, matching the consumer toolkit.
"""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all adapter failures."""


class ConfigError(AdapterError):
    """Invalid configuration value or unusable option combination."""


class LabelMapError(ConfigError):
    """Checkpoint labels are not bijective to the canonical tag set."""


class AlignmentError(AdapterError):
    """A word-level token is not covered by any subword piece."""


class TokenFileError(AdapterError):
    """Malformed token export file."""
