"""Efficiency and fidelity of concatenated entanglement swapping with double-pair noise."""

__version__ = "0.1.0"

from .algebra import ABSM, STANDARD, AlgebraElement, SigmaRule
from .chain import ChainSpec, LinkMetrics, SourceStats, bell_fidelity, link_metrics
from .errors import (
    ChainTooLongError,
    SwapcalcError,
    TruncationError,
    UndefinedFidelityError,
    UnreachableFidelityError,
    ValidationError,
)
from .kernels import BACKEND

__all__ = [
    "ABSM",
    "STANDARD",
    "AlgebraElement",
    "SigmaRule",
    "ChainSpec",
    "LinkMetrics",
    "SourceStats",
    "bell_fidelity",
    "link_metrics",
    "BACKEND",
    "SwapcalcError",
    "ValidationError",
    "ChainTooLongError",
    "UndefinedFidelityError",
    "UnreachableFidelityError",
    "TruncationError",
]
