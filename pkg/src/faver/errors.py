"""Exception types raised across the package."""


class FaverError(Exception):
    """Base class for all package errors."""


class FormatError(FaverError, ValueError):
    """Malformed or truncated video container."""


class UnsupportedFormatError(FormatError):
    """Well-formed container with a pixel format we do not decode."""


class EmptyPlanError(FaverError, ValueError):
    """Video too short to hold a single temporal filter window."""


class DegenerateInputError(FaverError, ValueError):
    """Samples carry no spread a distribution fit could use."""


class DataError(FaverError, ValueError):
    """Invalid feature data (non-finite values, missing branches, bad manifest)."""


class SchemaMismatchError(DataError):
    """Feature schema hash differs from the one built into this package."""


class ProtocolError(FaverError, ValueError):
    """Evaluation protocol cannot run on the given records."""


class UndefinedCorrelationError(FaverError, ValueError):
    """Correlation of a constant vector."""
