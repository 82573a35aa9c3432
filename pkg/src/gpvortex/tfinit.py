"""Closed-form Thomas-Fermi densities and condensate radii.

Dropping the kinetic term gives ``rho_TF = ((rho0 - 2 V_eff) / C_S)_+`` with
``C_S = 2 epsilon**2 C_g``; ``rho0`` is fixed by the unit-norm constraint.
Harmonic traps have explicit ``rho0``.  Radially symmetric quartic(+/-)
quadratic traps need the root of a scalar equation in an auxiliary variable
``eta`` and, for strongly negative quadratic coefficients, have a central
hole (``rho0 < 0``).

Only the 2D profiles are sampled on meshes; the 3D formulas are scalar.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .params import ModelParams


class Regime(str, enum.Enum):
    HARMONIC_2D = "Harmonic2D"
    HARMONIC_3D = "Harmonic3D"
    QUARTIC_PLUS_2D = "QuarticPlus2D"
    QUARTIC_HOLE_2D = "QuarticHole2D"
    QUARTIC_PURE_3D = "QuarticPure3D"
    QUARTIC_PLUS_3D = "QuarticPlus3D"
    QUARTIC_HOLE_3D = "QuarticHole3D"
    QUARTIC_DEPLETION_3D = "QuarticDepletion3D"


_HOLES = (Regime.QUARTIC_HOLE_2D, Regime.QUARTIC_HOLE_3D)


@dataclass(frozen=True)
class TFProfile:
    """Result of a Thomas-Fermi computation.

    ``a_x, a_y, a_z, a_4`` are the effective trap coefficients the profile was
    built for.  Radii that do not apply to a regime are ``None``.
    """

    regime: Regime
    rho0: float
    c_s: float
    a_x: float
    a_y: float
    a_4: float = 0.0
    a_z: float | None = None
    r_x: float | None = None
    r_y: float | None = None
    r_z: float | None = None
    r_max: float | None = None
    r_minus: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if not self.c_s > 0:
            raise ConfigError("Thomas-Fermi profile needs C_S > 0 (C_g > 0)")
        if self.regime in _HOLES:
            if not (self.rho0 < 0 and self.r_minus and self.r_minus > 0):
                raise NumericError(f"inconsistent hole profile: rho0={self.rho0}")
        elif not self.rho0 > 0:
            raise NumericError(f"regime {self.regime.value} needs rho0 > 0, got {self.rho0}")

    @property
    def radial(self) -> bool:
        return self.regime not in (Regime.HARMONIC_2D, Regime.HARMONIC_3D)

    def density(self, x, y, z=0.0):
        """``rho_TF`` at points (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        two_v = self.a_x * x * x + self.a_y * y * y + self.a_4 * r2 * r2
        if self.a_z is not None:
            two_v = two_v + self.a_z * np.square(z)
        return np.maximum(self.rho0 - two_v, 0.0) / self.c_s

    def summary(self) -> dict:
        out = {"regime": self.regime.value, "rho0": self.rho0, "C_S": self.c_s}
        for key in ("r_x", "r_y", "r_z", "r_max", "r_minus", "eta"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


# -- root finding -------------------------------------------------------------


def safeguarded_newton(f, df, lo, hi, *, tol=1e-15, max_iter=100):
    """Root of ``f`` in ``[lo, hi]`` by Newton steps with bisection fallback.

    ``f(lo)`` and ``f(hi)`` must have opposite signs.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NumericError(f"root not bracketed in [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(flo):
            lo, flo = x, fx
        else:
            hi = x
        d = df(x)
        step = fx / d if d != 0.0 else np.inf
        x_new = x - step
        if not (min(lo, hi) < x_new < max(lo, hi)):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x_new)) or abs(hi - lo) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    raise NumericError(f"Newton iteration did not converge in {max_iter} steps; bracket [{lo}, {hi}]")


def _radius_sq(a2, a4, rho0, sign=+1.0):
    disc = a2 * a2 + 4.0 * rho0 * a4
    return (-a2 + sign * math.sqrt(max(disc, 0.0))) / (2.0 * a4)


# -- harmonic -------------------------------------------------------------------


def tf_harmonic_2d(a_x: float, a_y: float, c_s: float) -> TFProfile:
    if a_x <= 0 or a_y <= 0:
        raise ConfigError("harmonic trap cannot confine at Omega >= omega_perp (effective a_x, a_y <= 0)")
    rho0 = math.sqrt(2.0 * math.sqrt(a_x * a_y) / math.pi * c_s)
    r_x, r_y = math.sqrt(rho0 / a_x), math.sqrt(rho0 / a_y)
    return TFProfile(Regime.HARMONIC_2D, rho0, c_s, a_x, a_y, r_x=r_x, r_y=r_y, r_max=max(r_x, r_y))


def tf_harmonic_3d(a_x: float, a_y: float, a_z: float, c_s: float) -> TFProfile:
    if min(a_x, a_y, a_z) <= 0:
        raise ConfigError("harmonic trap cannot confine at Omega >= omega_perp (non-positive coefficient)")
    rho0 = (15.0 * math.sqrt(a_x * a_y * a_z) / (8.0 * math.pi) * c_s) ** 0.4
    r_x, r_y, r_z = (math.sqrt(rho0 / a) for a in (a_x, a_y, a_z))
    return TFProfile(
        Regime.HARMONIC_3D, rho0, c_s, a_x, a_y, a_z=a_z, r_x=r_x, r_y=r_y, r_z=r_z, r_max=max(r_x, r_y)
    )


# -- quartic +/- quadratic, 2D ------------------------------------------------


def tf_quartic_2d(a_2: float, a_4: float, c_s: float) -> TFProfile:
    """Radially symmetric ``V_eff = (a_2 r^2 + a_4 r^4) / 2``; ``a_2`` may be negative."""
    if a_4 <= 0:
        raise ConfigError("quartic Thomas-Fermi profile needs a4 > 0")
    if a_2 < 0 and a_4 < math.sqrt(math.pi * abs(a_2) ** 3 / (6.0 * c_s)):
        rho0 = ((6.0 * a_4**2 * c_s / math.pi) ** (2.0 / 3.0) - a_2**2) / (4.0 * a_4)
        r_plus = math.sqrt(_radius_sq(a_2, a_4, rho0, +1.0))
        r_minus = math.sqrt(_radius_sq(a_2, a_4, rho0, -1.0))
        return TFProfile(
            Regime.QUARTIC_HOLE_2D, rho0, c_s, a_2, a_2, a_4=a_4, r_max=r_plus, r_minus=r_minus
        )
    a_eta = 6.0 * c_s / math.pi

    def f(eta):
        return 4.0 * a_4 * eta**3 + 3.0 * a_2 * eta**2 - a_eta

    def df(eta):
        return 12.0 * a_4 * eta**2 + 6.0 * a_2 * eta

    hi = 200.0
    while f(hi) < 0:
        hi *= 2.0
    eta = safeguarded_newton(f, df, 1e-8, hi)
    rho0 = a_2 * eta + a_4 * eta**2
    return TFProfile(
        Regime.QUARTIC_PLUS_2D, rho0, c_s, a_2, a_2, a_4=a_4, r_max=math.sqrt(eta), eta=eta
    )


# -- quartic +/- quadratic, 3D ------------------------------------------------


def quartic_3d_f(eta, a_eta):
    """Scalar equation whose root fixes ``rho0`` for the 3D quartic trap."""
    w = 1.0 + eta * eta
    return a_eta * eta**4 - w * w * math.atan2(1.0, eta) + eta**3 + 5.0 / 3.0 * eta


def quartic_3d_fprime(eta, a_eta):
    w = 1.0 + eta * eta
    return 4.0 * a_eta * eta**3 - 4.0 * eta * w * math.atan2(1.0, eta) + w + 3.0 * eta**2 + 5.0 / 3.0


def tf_quartic_3d(a_2: float, a_4: float, a_z: float, c_s: float) -> TFProfile:
    """``V_eff = (a_2 r^2 + a_4 r^4 + a_z z^2) / 2`` with radial symmetry."""
    if a_4 <= 0 or a_z <= 0:
        raise ConfigError("3D quartic Thomas-Fermi profile needs a4 > 0 and az > 0")
    common = dict(c_s=c_s, a_x=a_2, a_y=a_2, a_4=a_4, a_z=a_z)
    if a_2 == 0:
        rho0 = math.sqrt(2.0 * math.sqrt(a_z) * math.sqrt(4.0 * a_4)) * math.sqrt(c_s) / math.pi
        return TFProfile(
            Regime.QUARTIC_PURE_3D, rho0, r_max=(rho0 / a_4) ** 0.25, r_z=math.sqrt(rho0 / a_z), **common
        )
    a_eta = math.sqrt(a_z) * (4.0 * a_4) ** 2.5 / (math.pi * a_2**4) * c_s

    def f(eta):
        return quartic_3d_f(eta, a_eta)

    def df(eta):
        return quartic_3d_fprime(eta, a_eta)

    shift = a_2**2 / (4.0 * a_4)
    if a_2 > 0:
        eta = safeguarded_newton(f, df, 1e-8, 200.0)
        rho0 = shift / eta**2
        return TFProfile(
            Regime.QUARTIC_PLUS_3D,
            rho0,
            r_max=math.sqrt(_radius_sq(a_2, a_4, rho0)),
            r_z=math.sqrt(rho0 / a_z),
            eta=eta,
            **common,
        )
    xi = math.sqrt(a_eta / math.pi)
    if xi < 1.0:
        rho0 = shift * (xi - 1.0)
        return TFProfile(
            Regime.QUARTIC_HOLE_3D,
            rho0,
            r_max=math.sqrt(_radius_sq(a_2, a_4, rho0, +1.0)),
            r_minus=math.sqrt(_radius_sq(a_2, a_4, rho0, -1.0)),
            r_z=math.sqrt(rho0 / a_z + shift / a_z),
            **common,
        )
    lo = -200.0
    # near xi = 1 the root moves to -infinity (rho0 -> 0); widen the bracket
    while np.sign(f(lo)) == np.sign(f(-1e-8)) and lo > -1e12:
        lo *= 2.0
    eta = safeguarded_newton(f, df, lo, -1e-8)
    rho0 = shift / eta**2
    return TFProfile(
        Regime.QUARTIC_DEPLETION_3D,
        rho0,
        r_max=math.sqrt(_radius_sq(a_2, a_4, rho0)),
        r_z=math.sqrt(rho0 / a_z + shift / a_z),
        eta=eta,
        **common,
    )


# -- model-level helpers --------------------------------------------------------


def profile_for(p: ModelParams) -> TFProfile:
    """Pick the regime matching the trap in ``p``."""
    c_s = p.c_s
    if not c_s > 0:
        raise ConfigError("Thomas-Fermi sizing needs C_g > 0")
    if p.dimension == 3:
        if p.a_4 == 0:
            return tf_harmonic_3d(p.a_x, p.a_y, p.a_z, c_s)
        if p.a_x != p.a_y:
            raise ConfigError("quartic traps must be radially symmetric (ax == ay)")
        return tf_quartic_3d(p.a_x, p.a_4, p.a_z, c_s)
    if p.a_4 == 0:
        return tf_harmonic_2d(p.a_x, p.a_y, c_s)
    if p.a_x != p.a_y:
        raise ConfigError("quartic traps must be radially symmetric (ax == ay)")
    return tf_quartic_2d(p.a_x, p.a_4, c_s)


def domain_radii(profile: TFProfile, inflation: float = 1.25) -> tuple[float, float]:
    """Semi-axes of the computational ellipse."""
    if profile.radial:
        return inflation * profile.r_max, inflation * profile.r_max
    return inflation * profile.r_x, inflation * profile.r_y


def tf_field(profile: TFProfile, p: ModelParams, mesh):
    """Normalized real field ``sqrt(rho_TF)`` sampled at the mesh vertices."""
    from .field import ComplexField, normalize

    same = np.allclose(
        [profile.a_x, profile.a_y, profile.a_4], [p.a_x, p.a_y, p.a_4], rtol=1e-12, atol=1e-14
    )
    if not same:
        raise ConfigError("Thomas-Fermi profile was built for different trap coefficients")
    if profile.regime in (Regime.HARMONIC_3D,) or profile.regime.value.endswith("3D"):
        raise ConfigError("3D Thomas-Fermi profiles cannot be sampled on a 2D mesh")
    rho = profile.density(mesh.points[:, 0], mesh.points[:, 1])
    vals = np.sqrt(rho).astype(complex)
    vals[mesh.boundary] = 0.0
    return normalize(ComplexField(mesh, vals))
