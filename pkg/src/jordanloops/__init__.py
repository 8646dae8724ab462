"""Emerging Jordan blocks and logarithmic couplings in periodic Temperley-Lieb loop chains."""

from __future__ import annotations

from .analysis import VERSION as __version__
from .basis import Glued, GluedQuotient, ModuleSpec, QuotientZero, Standard, build_basis
from .errors import DegenerateMeasurement, InvalidArgument, JordanLoopsError, LimitFailure, NumericalFailure
from .params import LatticeParams

__all__ = [
    "DegenerateMeasurement",
    "Glued",
    "GluedQuotient",
    "InvalidArgument",
    "JordanLoopsError",
    "LatticeParams",
    "LimitFailure",
    "ModuleSpec",
    "NumericalFailure",
    "QuotientZero",
    "Standard",
    "__version__",
    "build_basis",
]
