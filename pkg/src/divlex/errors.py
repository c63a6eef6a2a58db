"""Exception hierarchy shared across the package."""


class DivlexError(Exception):
    """Base class for all package-specific errors."""


# corpus
class SchemaError(DivlexError):
    """A record in a dataset file violates the JSONL schema."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class IntegrityError(DivlexError):
    """A record references an id that does not exist in the dataset."""


class ConfigError(DivlexError):
    """Invalid generator or run configuration."""


# annotation
class PredictorUnavailable(DivlexError):
    """The charge predictor backend could not be reached."""


class EmptyPreference(DivlexError):
    """A sorted preference with no levels and no unselected charges."""


class MismatchedKeys(DivlexError):
    """Per-annotator intent maps do not share the same key set."""


class EmptyInput(DivlexError):
    """An aggregate over an empty collection."""


class InsufficientAnnotators(DivlexError):
    """Agreement statistics need at least two annotators."""


# textsim
class EmptyText(DivlexError):
    """Passage slicing requires at least one sentence."""


class ProviderError(DivlexError):
    """The embedding provider failed or returned malformed vectors."""


class InputTooLong(DivlexError):
    """A similarity vector does not fit twice into the fixed-length layout."""


# chargegraph
class NegativeFrequency(DivlexError):
    """Reversal frequency matrix contains a negative entry."""


class AllZero(DivlexError):
    """A charge distribution collapsed to all zeros before normalization."""


class NoCharges(DivlexError):
    """A document distribution needs a non-empty charge set."""


class DimensionMismatch(DivlexError):
    """Vector or model dimensions do not agree."""


# ranker
class PoolTooSmall(DivlexError):
    """The candidate pool cannot fill the requested ranked-list positions."""


class NonFiniteLoss(DivlexError):
    """Training loss became NaN or infinite."""


class EmptyQuery(DivlexError):
    """BM25 received a query with no tokens."""
