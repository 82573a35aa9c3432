"""Initial fields: axisymmetric ground state, imprinted vortices, vortex arrays.

The axisymmetric profile minimizes the reduced energy

    2 pi int [ f'^2/2 + (C_trap_eff + m^2 / (2 r^2)) f^2 + C_g f^4 / 2 ] r dr

under ``2 pi int f^2 r dr = 1`` with 1D P1 elements, solved by the same
Newton-KKT core as the 2D problem.  The ``m^2 / (2 r^2)`` term is the
standard reduction of a winding-``m`` field ``f(r) e^{i m theta}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericError
from .field import ComplexField, normalize
from .kktmin import newton_kkt
from .mesh import RadialMesh1D
from .params import ModelParams

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class VortexSpec:
    center: tuple
    core_radius: float
    winding: int = 1

    def __post_init__(self):
        if not self.core_radius > 0:
            raise ConfigError("vortex core radius must be positive")
        if int(self.winding) != self.winding or self.winding == 0:
            raise ConfigError("vortex winding must be a non-zero integer")


@dataclass(frozen=True)
class VortexArraySpec:
    """Rings of vortices: ring ``k`` has radius ``r_first + k dr`` and
    orientation ``theta_first + k dtheta``."""

    n_rings: int
    per_ring: int
    r_first: float
    dr: float = 0.0
    theta_first: float = 0.0
    dtheta: float = 0.0

    def __post_init__(self):
        if self.n_rings < 0:
            raise ConfigError("number of vortex rings must be >= 0")
        if self.n_rings >= 1:
            if self.per_ring < 1:
                raise ConfigError("@Nv must be >= 1")
            if not self.r_first > 0:
                raise ConfigError("@Rarr must be positive")

    def centers(self) -> np.ndarray:
        pts = []
        for k in range(self.n_rings):
            r = self.r_first + k * self.dr
            th = self.theta_first + k * self.dtheta + 2.0 * np.pi * np.arange(self.per_ring) / self.per_ring
            pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        return np.vstack(pts) if pts else np.zeros((0, 2))


def healing_length(p: ModelParams, peak_density: float) -> float:
    """``xi = (2 C_g rho_peak)^{-1/2}``, where kinetic and interaction terms balance."""
    if peak_density <= 0 or p.c_g <= 0:
        raise ConfigError("healing length needs C_g > 0 and a positive peak density")
    return 1.0 / math.sqrt(2.0 * p.c_g * peak_density)


# -- vortex imprinting -----------------------------------------------------------------


def vortex_amplitude(r, core_radius):
    """``sqrt((1 + tanh(4 (r - eps_v) / eps_v)) / 2)``."""
    return np.sqrt(0.5 * (1.0 + np.tanh(4.0 / core_radius * (np.asarray(r) - core_radius))))


def _vortex_factor(points, v: VortexSpec):
    dx = points[:, 0] - v.center[0]
    dy = points[:, 1] - v.center[1]
    r = np.hypot(dx, dy)
    return vortex_amplitude(r, v.core_radius) * np.exp(1j * v.winding * np.arctan2(dy, dx))


def imprint_vortex(u: ComplexField, v: VortexSpec, renormalize: bool = True) -> ComplexField:
    out = ComplexField(u.mesh, u.values * _vortex_factor(u.mesh.points, v))
    return normalize(out) if renormalize else out


def imprint_array(u: ComplexField, spec: VortexArraySpec, core_radius: float, winding: int = 1) -> ComplexField:
    vals = u.values.copy()
    for c in spec.centers():
        vals *= _vortex_factor(u.mesh.points, VortexSpec((c[0], c[1]), core_radius, winding))
    out = ComplexField(u.mesh, vals)
    return normalize(out) if spec.n_rings else out


def centerline_x(z, shape: str, alpha: float, beta: float):
    """Transverse offset of a 3D vortex line at height ``z``.

    ``S``: two tanh branches meeting at the origin; ``U``: the mirror image of
    the S shape for ``z < 0``, so both ends bend the same way; ``I``: straight.
    """
    if not (alpha > 0 and beta > 0):
        raise ConfigError("centerline curvature and length must be positive")
    z = np.asarray(z, dtype=float)
    kind = shape.upper()[:1]
    if kind == "I":
        return np.zeros_like(z)
    t = math.tanh(alpha)
    neg = -1.0 + np.tanh(alpha * (1.0 + z / beta)) / t
    pos = 1.0 + np.tanh(alpha * (-1.0 + z / beta)) / t
    s_shape = np.where(z < 0, neg, pos)
    if kind == "S":
        return s_shape
    if kind == "U":
        return np.where(z < 0, -neg, pos)
    raise ConfigError(f"unknown centerline shape {shape!r} (expected I, S or U)")


# -- axisymmetric ground state -------------------------------------------------------------


class RadialProblem:
    """Reduced 1D energy on P1 elements with 5-point Gauss integration."""

    def __init__(self, p: ModelParams, rm: RadialMesh1D, winding: int = 0):
        if p.a_x != p.a_y:
            raise ConfigError("the axisymmetric seed needs a radially symmetric trap (ax == ay)")
        if p.a_x <= 0 and p.a_4 <= 0:
            raise ConfigError("effective trap does not confine (a <= 0 and a4 = 0)")
        if winding < 0:
            raise ConfigError("central winding must be >= 0")
        self.p, self.rm, self.m = p, rm, int(winding)
        r = rm.nodes
        n = len(r)
        h = np.diff(r)
        xq = 0.5 * (r[:-1, None] + r[1:, None]) + 0.5 * h[:, None] * _GAUSS_X[None, :]
        wq = 2.0 * np.pi * 0.5 * h[:, None] * _GAUSS_W[None, :] * xq  # includes 2 pi r
        lam = (xq - r[:-1, None]) / h[:, None]
        self.phi = np.stack([1.0 - lam, lam], axis=-1)  # (E, q, 2)
        self.wq = wq
        self.elems = np.column_stack([np.arange(n - 1), np.arange(1, n)])
        pot = p.c_trap_eff(xq, 0.0 * xq) + self.m**2 / (2.0 * xq * xq)
        dphi = np.stack([-1.0 / h, 1.0 / h], axis=-1)  # (E, 2)
        k_loc = np.einsum("eq,ea,eb->eab", wq, dphi, dphi)
        m_loc = np.einsum("eq,eqa,eqb->eab", wq, self.phi, self.phi)
        v_loc = np.einsum("eq,eqa,eqb->eab", wq * pot, self.phi, self.phi)
        self.K = self._assemble(k_loc)
        self.Mfull = self._assemble(m_loc)
        self.V = self._assemble(v_loc)
        free = np.ones(n, dtype=bool)
        free[-1] = False
        if self.m >= 1:
            free[0] = False
        self.free = np.flatnonzero(free)
        sel = lambda a: a[self.free][:, self.free].tocsc()  # noqa: E731
        self.Kf, self.Vf, self.B = sel(self.K), sel(self.V), sel(self.Mfull)
        self.n = n

    def _assemble(self, local):
        rows = np.repeat(self.elems, 2, axis=1).ravel()
        cols = np.tile(self.elems, (1, 2)).ravel()
        n = len(self.rm.nodes)
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

    def full(self, x) -> np.ndarray:
        f = np.zeros(self.n)
        f[self.free] = x
        return f

    def _at_qp(self, x):
        f = self.full(x)
        return np.einsum("eqa,ea->eq", self.phi, f[self.elems])

    def _load(self, coef):
        loc = np.einsum("eq,eqa->ea", self.wq * coef, self.phi)
        out = np.bincount(self.elems.ravel(), weights=loc.ravel(), minlength=self.n)
        return out[self.free]

    def energy(self, x) -> float:
        fq = self._at_qp(x)
        quart = 0.5 * self.p.c_g * float(np.sum(self.wq * fq**4))
        return float(0.5 * x @ (self.Kf @ x) + x @ (self.Vf @ x)) + quart

    def gradient(self, x) -> np.ndarray:
        fq = self._at_qp(x)
        return self.Kf @ x + 2.0 * (self.Vf @ x) + 2.0 * self.p.c_g * self._load(fq**3)

    def hessian(self, x):
        fq = self._at_qp(x)
        loc = np.einsum("eq,eqa,eqb->eab", self.wq * 6.0 * self.p.c_g * fq**2, self.phi, self.phi)
        quart = self._assemble(loc)[self.free][:, self.free]
        return (self.Kf + 2.0 * self.Vf + quart).tocsc()


@dataclass(frozen=True)
class RadialProfile:
    nodes: np.ndarray
    values: np.ndarray
    winding: int
    multiplier: float
    iterations: int

    def __call__(self, r):
        return np.interp(r, self.nodes, self.values, right=0.0)


def _initial_profile(p: ModelParams, r, m: int):
    from .tfinit import profile_for

    if p.c_g > 0:
        try:
            prof = profile_for(p)
            f0 = np.sqrt(prof.density(r, 0.0 * r))
        except (ConfigError, NumericError):
            f0 = np.zeros_like(r)
    else:
        f0 = np.zeros_like(r)
    if not np.any(f0 > 0):
        a = max(p.a_x, 1e-2)
        f0 = np.exp(-0.5 * math.sqrt(2.0 * a) / p.epsilon * r * r)
    if m:
        core = r / np.sqrt(r * r + (0.1 * r[-1]) ** 2)
        f0 = f0 * core**m
    return f0 + 1e-3 * f0.max() * (r < r[-1])


def radial_ground_state(
    p: ModelParams, rm: RadialMesh1D, winding: int = 0, tol: float = 1e-10, max_iter: int = 100
) -> RadialProfile:
    """Minimize the reduced energy on ``rm``; ``f(R_max) = 0`` and ``f(0) = 0`` when ``m >= 1``."""
    prob = RadialProblem(p, rm, winding)
    f0 = _initial_profile(p, rm.nodes, prob.m)
    x0 = f0[prob.free]
    x0 = x0 / math.sqrt(x0 @ (prob.B @ x0))
    state = newton_kkt(prob, x0, tol=tol, max_iter=max_iter)
    if not state.converged:
        hist = ", ".join(f"{h[0]:.2e}" for h in state.history[-6:])
        raise NumericError(f"axisymmetric Newton solve did not converge; residual history: {hist}")
    f = prob.full(state.x)
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return RadialProfile(rm.nodes.copy(), f, prob.m, state.lam, state.iterations)


def radial_field(profile: RadialProfile, mesh) -> ComplexField:
    """``f(r) e^{i m theta}`` sampled at the mesh vertices and normalized."""
    x, y = mesh.points[:, 0], mesh.points[:, 1]
    vals = profile(np.hypot(x, y)).astype(complex)
    if profile.winding:
        vals *= np.exp(1j * profile.winding * np.arctan2(y, x))
    vals[mesh.boundary] = 0.0
    return normalize(ComplexField(mesh, vals))
