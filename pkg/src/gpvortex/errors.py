"""Exception hierarchy shared by all modules.

The CLI maps :class:`ConfigError` to exit code 1 and :class:`NumericError`
to exit code 2.
"""


class GPVortexError(Exception):
    """Base class for package errors."""


class ConfigError(GPVortexError, ValueError):
    """Invalid or missing configuration, including bad input files."""


class NumericError(GPVortexError, ArithmeticError):
    """A numerical procedure failed (no convergence, singular system, ...)."""


class MeshError(GPVortexError, ValueError):
    """Degenerate mesh or failed geometric operation."""


class InterpolationError(MeshError):
    """A target point lies outside the source mesh."""
