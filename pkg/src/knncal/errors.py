"""Exception types shared across the package."""


class KnncalError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(KnncalError):
    """An argument value violates a documented precondition."""


class InvalidConfig(KnncalError):
    """A configuration combination is unusable (e.g. missing model for a mode)."""


class DimensionMismatch(KnncalError):
    """Vector or matrix shapes do not line up."""


class MissingLabel(KnncalError):
    """An operation needed a gold label that the instance does not carry."""


class EmptyDatastore(KnncalError):
    """A retrieval was attempted against an empty (or fully excluded) pool."""


class OverlapError(KnncalError):
    """Query instances and datastore instances must be disjoint but are not."""


class SplitError(KnncalError):
    """A dataset cannot be split as requested (e.g. odd per-class count)."""


class ParseError(KnncalError):
    """A representation or checkpoint file line could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(KnncalError):
    """A parsed file violates a schema invariant.

    ``path`` names the offending field, e.g. ``instance[id=t3].variants[2].embedding``.
    """

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericalError(KnncalError):
    """A numeric routine hit a non-finite value."""
