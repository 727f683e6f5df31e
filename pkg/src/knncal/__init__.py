"""Nearest-neighbor calibration of in-context-learning predictions."""

from .core import (
    Dataset,
    Distribution,
    Embedding,
    Hyperparams,
    Instance,
    LabelSpace,
    Variant,
    derive_seed,
    seeded_rng,
    softmax,
)
from .errors import (
    DimensionMismatch,
    EmptyDatastore,
    InvalidConfig,
    InvalidInput,
    KnncalError,
    MissingLabel,
    NumericalError,
    OverlapError,
    ParseError,
    SchemaError,
    SplitError,
)

__all__ = [
    "Dataset",
    "Distribution",
    "Embedding",
    "Hyperparams",
    "Instance",
    "LabelSpace",
    "Variant",
    "derive_seed",
    "seeded_rng",
    "softmax",
    "KnncalError",
    "InvalidInput",
    "InvalidConfig",
    "DimensionMismatch",
    "MissingLabel",
    "EmptyDatastore",
    "OverlapError",
    "SplitError",
    "ParseError",
    "SchemaError",
    "NumericalError",
]
