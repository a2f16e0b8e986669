"""Simulation and spectral verification of killed non-symmetric Levy processes."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CensoringError, ConvergenceError, GridMismatchError, LevyIUError, PositivityError, QuadratureError,
    ResourceCapExceeded, ValidationError,
)
from .geometry import (  # noqa: E402
    Domain, ball, box, certify_kappa_fat, dist_to_boundary, inner_sets, make_grid, roughly_connected,
)
from .levy_model import (  # noqa: E402
    LevyModel, SpectralDensity, add_brownian, characteristic_exponent, classify_assumption, dual,
    levy_density, make_stable_model, make_truncated_model, model_from_json,
)
from .rng import RngStream  # noqa: E402

__all__ = [
    "CensoringError", "ConvergenceError", "Domain", "GridMismatchError", "LevyIUError", "LevyModel",
    "PositivityError", "QuadratureError", "ResourceCapExceeded", "RngStream", "SpectralDensity", "ValidationError",
    "add_brownian", "ball", "box", "certify_kappa_fat", "characteristic_exponent", "classify_assumption",
    "dist_to_boundary", "dual", "inner_sets", "levy_density", "make_grid", "make_stable_model",
    "make_truncated_model", "model_from_json", "roughly_connected",
]
