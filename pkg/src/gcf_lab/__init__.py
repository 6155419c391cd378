"""Numerical laboratory for translating solitons of the alpha-Gauss curvature flow.

Modules: constants (closed-form exponents), circlefield (spectral calculus on
S^1), shrinker (self-similar shrinking curves), spectrum (eigenpairs of the
linearized operator), linearized (exterior solutions by Picard iteration),
radial (rotationally symmetric profiles and barriers), march (level-set
marching in the height variable) and cli.
"""
from .constants import (
    DerivedConstants,
    FlowParams,
    beta_exponents,
    derive_constants,
    jacobi_count_enumerated,
    jacobi_count_round,
    jacobi_count_table,
)
from .circlefield import CircleField, WeightedInner
from .exceptions import GCFLabError, SolverFailure, ValidationError
from .shrinker import ShrinkerProfile, round_profile, solve_shrinker_curve
from .spectrum import SpectralData, eig_L

__version__ = "0.1.0"

__all__ = [
    "CircleField",
    "DerivedConstants",
    "FlowParams",
    "GCFLabError",
    "ShrinkerProfile",
    "SolverFailure",
    "SpectralData",
    "ValidationError",
    "WeightedInner",
    "beta_exponents",
    "derive_constants",
    "eig_L",
    "jacobi_count_enumerated",
    "jacobi_count_round",
    "jacobi_count_table",
    "round_profile",
    "solve_shrinker_curve",
]
