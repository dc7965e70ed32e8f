"""Volume-growth bounds on rotationally symmetric solitons and quasi-Einstein models."""

from .errors import (ConvergenceError, DivergenceError, DomainError, HypothesisError,
                     PreconditionError, SolvolError)
from .models import (MetricMeasure, PoleModel, ProductModel, QuasiEinstein, Shrinker,
                     flat_trivial, gaussian_soliton, generate_from_potential, hyperbolic_qe,
                     ricci_flat_product_qe)
from .numerics import RadialProfile

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DivergenceError", "DomainError", "HypothesisError",
    "MetricMeasure", "PoleModel", "PreconditionError", "ProductModel", "QuasiEinstein",
    "RadialProfile", "Shrinker", "SolvolError", "flat_trivial", "gaussian_soliton",
    "generate_from_potential", "hyperbolic_qe", "ricci_flat_product_qe", "__version__",
]
