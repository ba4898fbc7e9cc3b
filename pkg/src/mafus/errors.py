"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
TrainingError -> 4, ExplanationError -> 5.
"""


class MafusError(Exception):
    """Base class for every toolkit error."""


class ConfigError(MafusError):
    """Invalid or unresolvable run configuration."""


class ContractError(MafusError):
    """A caller violated an operation precondition (shape, domain, coverage)."""


class DataError(MafusError):
    """Problems with input data at load/clean/encode/split time."""


class SchemaError(DataError):
    """Column set does not match the declared schema."""


class ParseError(DataError):
    """A cell could not be parsed; carries row/column context in the message."""


class EmptyInputError(DataError):
    """Input file or cohort contains no rows."""


class EmptyResultError(DataError):
    """An operation would return a cohort with zero rows."""


class SizingError(DataError):
    """A split would leave the train or test side empty."""


class StratificationError(DataError):
    """A class is too small for the requested number of folds."""


class SelectionError(MafusError):
    """Feature selection produced an empty feature set."""


class TrainingError(MafusError):
    """Model fitting failed."""


class MetricError(MafusError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""


class ExplanationError(MafusError):
    """Attribution could not be computed as requested."""
