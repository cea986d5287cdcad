"""Exception hierarchy. The CLI maps these onto exit codes:
ConfigError -> 2, DataError -> 3, NumericalError -> 4.
"""


class DsnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DsnError):
    """Invalid configuration value or command usage."""


class DataError(DsnError):
    """Problem with an input dataset or model file."""


class DataFormatError(DataError):
    """A file is malformed: missing fields, wrong types, bad values."""


class DimensionError(DataError):
    """Feature dimensions disagree within a collection or against a model."""


class IdRangeError(DataError):
    """An item id points outside the collection's ground set."""


class DegenerateCollectionError(DataError):
    """Score normalization failed: reference summaries do not beat random ones."""


class NumericalError(DsnError):
    """Training diverged or a gradient check exceeded its tolerance."""
