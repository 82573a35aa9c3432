"""Stationary states of the rotating Gross-Pitaevskii energy in 2D.

P1 finite elements on adaptively bisected triangular meshes, with two
minimizers: a projected Sobolev-gradient descent with exact line search
(:mod:`gpvortex.sobolev`) and an equality-constrained Newton method on the
split real/imaginary formulation (:mod:`gpvortex.kktmin`).
"""
from .errors import ConfigError, GPVortexError, InterpolationError, MeshError, NumericError
from .params import ModelParams, PhysicalParams, Scaling, build_dimensionless, from_coefficients

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GPVortexError",
    "InterpolationError",
    "MeshError",
    "ModelParams",
    "NumericError",
    "PhysicalParams",
    "Scaling",
    "build_dimensionless",
    "from_coefficients",
]
