"""Exception hierarchy plus the violation record shared by validators.

Errors abort processing. Violations are data-quality findings that are
reported and carried along, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass


class EvotingError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EvotingError):
    """Invalid configuration; maps to CLI exit code 2."""


class DataError(EvotingError):
    """Invalid input data; maps to CLI exit code 1."""


# Standoff parsing.
class MalformedLine(DataError): ...


class OffsetOutOfRange(DataError): ...


class SurfaceMismatch(DataError): ...


class UnknownLabel(DataError): ...


# Prediction files.
class SchemaError(DataError): ...


class ProbabilityError(DataError): ...


class DuplicateRow(DataError): ...


# Calibration and ensembling.
class EmptyInput(DataError): ...


class AlignmentError(DataError): ...


class EmptyEnsemble(DataError): ...


class WeightMismatch(DataError): ...


# Decoding and matching.
class LengthMismatch(DataError): ...


class UnsortedInput(DataError): ...


@dataclass(frozen=True, slots=True)
class Violation:
    kind: str
    doc_id: str | None
    message: str
