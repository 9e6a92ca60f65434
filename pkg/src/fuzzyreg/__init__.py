"""Finite-scale fuzzy predicates, discrete measures, partitions and certificates."""

__version__ = "0.1.0"

from .core import (
    Axis,
    AxisMismatchError,
    Certificate,
    DegenerateLocalizationError,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    Localization,
    PartitionOfUnity,
    expectation,
    localize,
    morley_product,
    oscillation,
    permutation_invariance_check,
)

__all__ = [
    "Axis",
    "AxisMismatchError",
    "Certificate",
    "DegenerateLocalizationError",
    "DiscreteMeasure",
    "FuzzyPredicate",
    "GridPartition",
    "Localization",
    "PartitionOfUnity",
    "expectation",
    "localize",
    "morley_product",
    "oscillation",
    "permutation_invariance_check",
    "__version__",
]
