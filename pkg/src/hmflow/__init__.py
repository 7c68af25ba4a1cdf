"""Type II blow-up of the equivariant harmonic map heat flow in dimensions d >= 7."""

__version__ = "0.1.0"

from .errors import HmflowError, InvalidInput, NeutralMode, NumericalFailure
from .spectral import (
    EigenfunctionBasis,
    RadialProfile,
    SpectralConstants,
    compute_constants,
    inner_product,
    make_basis,
    project,
)

__all__ = [
    "__version__",
    "EigenfunctionBasis",
    "HmflowError",
    "InvalidInput",
    "NeutralMode",
    "NumericalFailure",
    "RadialProfile",
    "SpectralConstants",
    "compute_constants",
    "inner_product",
    "make_basis",
    "project",
]
