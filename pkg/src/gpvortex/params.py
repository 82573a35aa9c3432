"""Physical and dimensionless parameters of the rotating condensate.

Two scalings share one code path through the parameter ``epsilon``: the
classical scaling (``epsilon = 1``, lengths in oscillator units) and the
Aftalion-Riviere scaling, where ``epsilon`` is small in the Thomas-Fermi
regime.  Everything downstream works in the dimensionless system; physical
units only appear in :class:`PhysicalParams`.

Trap coefficients given directly (``@kind 0``) are *bare* harmonic
coefficients.  The centrifugal correction ``-(Omega/omega_perp)**2`` is
applied here, so ``ModelParams.a_x`` is always the effective coefficient.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import ConfigError


class Scaling(str, enum.Enum):
    CLASSICAL = "Classical"
    AR = "AR"

    @classmethod
    def parse(cls, text: str) -> "Scaling":
        if isinstance(text, cls):
            return text
        for member in cls:
            if member.value.lower() == str(text).strip().lower():
                return member
        raise ConfigError(f"unknown scaling {text!r} (expected 'Classical' or 'AR')")


@dataclass(frozen=True)
class PhysicalParams:
    """Trap, rotation and atom parameters in SI units.

    ``omega_perp`` is the reference frequency used for all scalings; it
    defaults to ``omega_x``.  ``beta_2d`` is the reduced 2D interaction
    constant, which has no closed form here and must be supplied for 2D runs.
    """

    atom_count: float
    atomic_mass: float
    scattering_length: float
    rotation_rate: float
    omega_x: float
    omega_y: float
    omega_z: float = 0.0
    omega_perp: float | None = None
    u2: float = 0.0
    u4: float = 0.0
    w2: float = 1.0
    w4: float = 1.0
    beta_2d: float | None = None

    def __post_init__(self):
        if self.atom_count <= 0:
            raise ConfigError("atom count N must be positive")
        if self.atomic_mass <= 0:
            raise ConfigError("atomic mass m must be positive")
        if self.reference_frequency <= 0:
            raise ConfigError("reference trap frequency must be positive")
        if self.u2 != 0 and self.w2 <= 0:
            raise ConfigError("laser waist w2 must be positive when U2 != 0")
        if self.u4 != 0 and self.w4 <= 0:
            raise ConfigError("laser waist w4 must be positive when U4 != 0")

    @property
    def reference_frequency(self) -> float:
        return self.omega_x if self.omega_perp is None else self.omega_perp

    @property
    def oscillator_length(self) -> float:
        return math.sqrt(constants.hbar / (self.atomic_mass * self.reference_frequency))


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless constants of the energy functional.

    Attributes
    ----------
    epsilon : float
        Scaling parameter (1 for the classical scaling).
    c_g : float
        Interaction constant ``sqrt(epsilon) * beta``.
    c_omega : float
        Rotation constant ``(Omega / omega_perp) / epsilon``.
    rotation_ratio : float
        ``Omega / omega_perp``.
    a_x_bare, a_y_bare, a_z_bare : float
        Harmonic coefficients without the centrifugal term.
    a_4 : float
        Quartic coefficient (already divided by ``epsilon``).
    """

    scaling: Scaling
    epsilon: float
    c_g: float
    c_omega: float
    rotation_ratio: float
    a_x_bare: float
    a_y_bare: float
    a_z_bare: float
    a_4: float
    beta: float
    dimension: int = 2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.c_g < 0:
            raise ConfigError("interaction constant C_g must be non-negative")
        if self.a_4 < 0:
            raise ConfigError("quartic coefficient a4 must be non-negative")
        if self.dimension not in (2, 3):
            raise ConfigError("dimension must be 2 or 3")
        if self.scaling is Scaling.CLASSICAL and self.epsilon != 1.0:
            raise ConfigError("classical scaling requires epsilon = 1")

    @property
    def a_x(self) -> float:
        return self.a_x_bare - self.rotation_ratio**2

    @property
    def a_y(self) -> float:
        return self.a_y_bare - self.rotation_ratio**2

    @property
    def a_z(self) -> float:
        return self.a_z_bare

    @property
    def c_s(self) -> float:
        """Thomas-Fermi constant ``2 epsilon**2 C_g``."""
        return 2.0 * self.epsilon**2 * self.c_g

    def with_rotation(self, rotation_ratio: float) -> "ModelParams":
        """Copy with a different ``Omega / omega_perp`` (same scaling)."""
        return ModelParams(
            scaling=self.scaling,
            epsilon=self.epsilon,
            c_g=self.c_g,
            c_omega=rotation_ratio / self.epsilon,
            rotation_ratio=rotation_ratio,
            a_x_bare=self.a_x_bare,
            a_y_bare=self.a_y_bare,
            a_z_bare=self.a_z_bare,
            a_4=self.a_4,
            beta=self.beta,
            dimension=self.dimension,
        )

    # potentials -----------------------------------------------------------

    def bare_potential(self, x, y):
        """Dimensionless bare trap ``V(x, y)`` (2D, z = 0)."""
        r2 = np.square(x) + np.square(y)
        return 0.5 * (self.a_x_bare * np.square(x) + self.a_y_bare * np.square(y) + self.a_4 * r2**2)

    def c_trap(self, x, y):
        """Trap coefficient of the energy, ``V / epsilon**2``."""
        return self.bare_potential(x, y) / self.epsilon**2

    def c_trap_eff(self, x, y):
        """Centrifugally corrected coefficient ``V_eff / epsilon**2``."""
        return effective_potential(self, x, y) / self.epsilon**2


def epsilon_ar(atom_count: float, scattering_length: float, oscillator_length: float) -> float:
    """Aftalion-Riviere scaling parameter ``(a_ho / (8 pi N a_s))**(2/5)``."""
    if atom_count <= 0 or scattering_length <= 0 or oscillator_length <= 0:
        raise ValueError("epsilon_ar needs positive N, a_s and a_ho")
    return (oscillator_length / (8.0 * math.pi * atom_count * scattering_length)) ** 0.4


def effective_potential(p: ModelParams, x, y):
    """``0.5 * (a_x x^2 + a_y y^2 + a_4 r^4)`` with effective coefficients."""
    r2 = np.square(x) + np.square(y)
    return 0.5 * (p.a_x * np.square(x) + p.a_y * np.square(y) + p.a_4 * r2**2)


def from_coefficients(
    scaling: Scaling | str,
    beta: float,
    rotation_ratio: float,
    a_x: float,
    a_y: float,
    a_4: float = 0.0,
    a_z: float = 1.0,
    dimension: int = 2,
) -> ModelParams:
    """Build parameters from directly supplied dimensionless coefficients.

    For the AR scaling ``epsilon`` follows from ``C_g = 1 / (2 epsilon**2)``,
    i.e. ``epsilon = (2 beta)**(-2/5)``.
    """
    scaling = Scaling.parse(scaling) if isinstance(scaling, str) else scaling
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    if scaling is Scaling.AR:
        if beta <= 0:
            raise ConfigError("AR scaling needs beta > 0")
        eps = (2.0 * beta) ** -0.4
    else:
        eps = 1.0
    return ModelParams(
        scaling=scaling,
        epsilon=eps,
        c_g=math.sqrt(eps) * beta,
        c_omega=rotation_ratio / eps,
        rotation_ratio=rotation_ratio,
        a_x_bare=a_x,
        a_y_bare=a_y,
        a_z_bare=a_z,
        a_4=a_4,
        beta=beta,
        dimension=dimension,
    )


def from_physical(phys: PhysicalParams, scaling: Scaling | str, dimension: int = 2) -> ModelParams:
    """Convert SI parameters to the dimensionless system."""
    scaling = Scaling.parse(scaling) if isinstance(scaling, str) else scaling
    w_perp = phys.reference_frequency
    m = phys.atomic_mass
    a_ho = phys.oscillator_length
    if scaling is Scaling.AR:
        eps = epsilon_ar(phys.atom_count, phys.scattering_length, a_ho)
    else:
        eps = 1.0
    if dimension == 3:
        beta = 4.0 * math.pi * phys.atom_count * phys.scattering_length / a_ho
    else:
        if phys.beta_2d is None:
            raise ConfigError("2D runs with physical parameters need @beta (reduced 2D coupling)")
        beta = phys.beta_2d
    ratio = phys.rotation_rate / w_perp
    laser2 = 2.0 * phys.u2 / (m * w_perp**2 * phys.w2**2) if phys.u2 else 0.0
    a4 = (2.0 / eps) * phys.u4 * a_ho**2 / (m * w_perp**2 * phys.w4**4) if phys.u4 else 0.0
    return ModelParams(
        scaling=scaling,
        epsilon=eps,
        c_g=math.sqrt(eps) * beta,
        c_omega=ratio / eps,
        rotation_ratio=ratio,
        a_x_bare=(phys.omega_x / w_perp) ** 2 + laser2,
        a_y_bare=(phys.omega_y / w_perp) ** 2 + laser2,
        a_z_bare=(phys.omega_z / w_perp) ** 2,
        a_4=a4,
        beta=beta,
        dimension=dimension,
    )


def build_dimensionless(raw, scaling: Scaling | str, dimension: int = 2) -> ModelParams:
    """Dispatch on the kind of input: :class:`PhysicalParams` or a mapping of
    direct coefficients (``beta``, ``Omop``, ``ax``, ``ay``, ``a4``, ``az``)."""
    if isinstance(raw, PhysicalParams):
        return from_physical(raw, scaling, dimension)
    try:
        return from_coefficients(
            scaling,
            beta=float(raw["beta"]),
            rotation_ratio=float(raw["Omop"]),
            a_x=float(raw["ax"]),
            a_y=float(raw["ay"]),
            a_4=float(raw.get("a4", 0.0)),
            a_z=float(raw.get("az", 1.0)),
            dimension=dimension,
        )
    except KeyError as exc:
        raise ConfigError(f"missing coefficient @{exc.args[0]}") from None
