"""Exception hierarchy and CLI exit codes.

Exit code convention: 0 success, 2 usage error (argparse), 3 data error,
4 numeric / internal-consistency error.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CopyscopeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_DATA


class DecodeError(CopyscopeError):
    """An image file exists but cannot be decoded."""


class DatasetError(CopyscopeError):
    """A directory or image set is empty, missing, or otherwise unusable."""


class SchemaError(CopyscopeError):
    """A CSV / JSON / binary input does not match its documented schema."""


class CompletenessError(SchemaError):
    """A value table is missing coalitions required by the operation."""


class MissingCoalitionError(CopyscopeError):
    """A coalition lookup failed on a (possibly partial) value table."""


class ConfigError(CopyscopeError):
    """Inconsistent configuration, e.g. mixed feature dimensions."""


class InsufficientSamplesError(CopyscopeError):
    """Too few samples for the requested statistic (covariance needs >= 2)."""


class UndefinedSimilarityError(CopyscopeError):
    """A metric is undefined for the given input (e.g. all-black image)."""


class NumericError(CopyscopeError):
    """Non-finite values, failed PSD checks, or internal-consistency failures."""

    exit_code = EXIT_NUMERIC


class NotPsdError(NumericError):
    """A matrix required to be positive semidefinite is not."""


class AxiomViolationError(NumericError):
    """An attribution result violated an axiom it is required to satisfy."""
