"""Prescribed Q-curvature on the round spheres S^5 and S^6.

Spectral Newton-Galerkin solver for the Paneitz equation, continuation
toward the critical exponent, and numerical diagnostics of blow-up.
"""
__version__ = "0.1.0"

from .paneitz import coeffs, paneitz_eigenvalue, q_round, spectral_paneitz
from .solver import ProblemSpec, SolverConfig, continue_mu, continue_tau, newton_solve
from .sphere import AmbientPolynomial, ZonalFunction, collocation_grid, north_pole

__all__ = [
    "AmbientPolynomial",
    "ProblemSpec",
    "SolverConfig",
    "ZonalFunction",
    "coeffs",
    "collocation_grid",
    "continue_mu",
    "continue_tau",
    "newton_solve",
    "north_pole",
    "paneitz_eigenvalue",
    "q_round",
    "spectral_paneitz",
]
