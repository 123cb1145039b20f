"""Exception hierarchy shared by all lstomo modules."""


class LstomoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LstomoError):
    """Invalid grid, level sequence, scenario or config-file input."""


class FieldFormatError(LstomoError):
    """Malformed field file (bad header, wrong value count, unparsable number)."""


class InvalidSlownessError(LstomoError):
    """Non-positive slowness encountered where a forward solve needs S > 0."""


class DataError(LstomoError):
    """Survey / observed-data arrays inconsistent with the measurement set."""


class SolverError(LstomoError):
    """An iterative solver failed in a way that indicates a bug, not bad data."""
