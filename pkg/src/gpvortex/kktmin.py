"""Equality-constrained Newton minimization of the GP energy.

The problem ``min E(x)`` subject to ``c(x) = x'Bx - 1 = 0`` is solved with
Newton steps on the Lagrangian ``L = E + lambda c``.  Each step factors
``H_tau = H_L + tau B`` and eliminates the multiplier through the Schur
complement; ``tau`` grows until the KKT matrix has exactly one negative
eigenvalue, which makes the reduced Hessian positive definite.  Steps are
globalized by backtracking on ``phi = ||grad L||^2 + c^2``, with the
renormalized energy as a second acceptance test (see :func:`newton_kkt`).

At a stationary point ``grad E = -2 lambda B x`` and ``grad E . x = 2 mu``,
so the multiplier and the chemical potential are related by ``lambda = -mu``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import EnergyModel
from .errors import NumericError
from .field import ComplexField, fe_data, normalize
from .params import ModelParams

log = logging.getLogger(__name__)

TAU_MIN, TAU_MAX = 1e-8, 1e8


class RegularizationError(NumericError):
    pass


class LineSearchError(NumericError):
    pass


# -- problems -----------------------------------------------------------------------


class SplitProblem:
    """The 2D energy over ``x = [u_r; u_i]`` restricted to interior vertices."""

    def __init__(self, mesh, p: ModelParams):
        self.mesh = mesh
        self.p = p
        self.model = EnergyModel(mesh, p)
        fe = fe_data(mesh)
        self.free = fe.interior
        self.n = mesh.n_vertices
        m_int = fe.mass[self.free][:, self.free]
        self.B = sp.block_diag([m_int, m_int], format="csc")
        self._sel = np.concatenate([self.free, self.free + self.n])

    def to_field(self, x) -> ComplexField:
        k = len(self.free)
        vals = np.zeros(self.n, dtype=complex)
        vals[self.free] = x[:k] + 1j * x[k:]
        return ComplexField(self.mesh, vals)

    def from_field(self, u: ComplexField) -> np.ndarray:
        return np.concatenate([u.real[self.free], u.imag[self.free]])

    def energy(self, x) -> float:
        return self.model.total(self.to_field(x))

    def gradient(self, x) -> np.ndarray:
        g = self.model.gradient(self.to_field(x))
        return np.concatenate([g.real[self.free], g.imag[self.free]])

    def hessian(self, x):
        h = self.model.hessian(self.to_field(x))
        return h[self._sel][:, self._sel].tocsc()


def split_energy(u_r, u_i, p: ModelParams, mesh) -> float:
    """Energy of ``u_r + i u_i`` given as full vertex vectors (including ``eps``)."""
    return EnergyModel(mesh, p).total(ComplexField(mesh, np.asarray(u_r) + 1j * np.asarray(u_i)))


def split_gradient(u_r, u_i, p: ModelParams, mesh) -> np.ndarray:
    g = EnergyModel(mesh, p).gradient(ComplexField(mesh, np.asarray(u_r) + 1j * np.asarray(u_i)))
    return np.concatenate([g.real, g.imag])


def split_hessian(u_r, u_i, p: ModelParams, mesh):
    return EnergyModel(mesh, p).hessian(ComplexField(mesh, np.asarray(u_r) + 1j * np.asarray(u_i)))


# -- Newton-KKT core --------------------------------------------------------------------


@dataclass
class KKTState:
    x: np.ndarray
    lam: float
    iterations: int = 0
    tau: float = 0.0
    history: list = field(default_factory=list)
    converged: bool = False

    @property
    def grad_norm(self) -> float:
        return self.history[-1][0] if self.history else np.inf

    @property
    def constraint(self) -> float:
        return self.history[-1][1] if self.history else np.inf


def constraint(problem, x) -> float:
    return float(x @ (problem.B @ x) - 1.0)


def _residual(problem, x, lam):
    g = problem.gradient(x)
    cg = 2.0 * (problem.B @ x)
    return g + lam * cg, constraint(problem, x), g, cg


def least_squares_multiplier(grad_e, grad_c) -> float:
    return float(-(grad_e @ grad_c) / (grad_c @ grad_c))


def _factor_inertia(h_l, metric, cg, tau):
    """Factor ``h_l + tau * metric``; return ``(lu, #neg(KKT))`` or ``(None, None)``."""
    mat = (h_l + tau * metric).tocsc()
    try:
        lu = spla.splu(mat, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        return None, None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None, None
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)) or np.any(d == 0):
        return None, None
    neg = int(np.sum(d < 0))
    hc = lu.solve(cg)
    return lu, neg + int(cg @ hc > 0)


def kkt_step(problem, state: KKTState, resid, c0, cg, metric=None):
    """Inertia-corrected Newton step ``(dx, dlam)`` for the current state."""
    metric = problem.B if metric is None else metric
    h_l = problem.hessian(state.x) + (2.0 * state.lam) * problem.B
    # warm start from a quarter of the last accepted shift
    tau = max(TAU_MIN, state.tau / 4.0)
    while True:
        lu, neg = _factor_inertia(h_l, metric, cg, tau)
        if lu is not None and neg == 1:
            break
        tau *= 2.0
        if tau > TAU_MAX:
            raise RegularizationError("Hessian regularization failed (tau > 1e8)")
    state.tau = tau
    hr = lu.solve(resid)
    hc = lu.solve(cg)
    dlam = (c0 - cg @ hr) / (cg @ hc)
    dx = -(hr + dlam * hc)
    return dx, float(dlam)


def _normalized(problem, x):
    return x / np.sqrt(x @ (problem.B @ x))


def newton_kkt(
    problem,
    x0,
    *,
    lam0: float | None = None,
    tol: float = 1e-8,
    ctol: float = 1e-10,
    max_iter: int = 50,
    armijo: float = 1e-4,
    max_halvings: int = 30,
    callback: Callable | None = None,
) -> KKTState:
    """Inner Newton loop; stops when ``||grad L||_inf < tol`` and ``|c| < min(tol, ctol)``.

    A trial step is accepted when it gives Armijo decrease of the residual
    merit ``phi``, or else of the energy at the renormalized point.  Far from
    a minimizer the regularized Newton direction need not reduce ``phi``,
    while its tangent part still lowers the energy; steps accepted through
    the energy are renormalized and the multiplier is reset by least squares.
    History rows are ``(||grad L||_inf, |c|, phi, tau, alpha, mode)`` with
    ``mode`` ``"r"`` (residual) or ``"e"`` (energy).
    """
    ctol = min(tol, ctol)
    x = np.array(x0, dtype=float)
    resid, c0, g, cg = _residual(problem, x, 0.0)
    lam = least_squares_multiplier(g, cg) if lam0 is None else float(lam0)
    resid = g + lam * cg
    state = KKTState(x, lam)
    phi = float(resid @ resid + c0 * c0)
    state.history.append((float(np.abs(resid).max()), abs(c0), phi, 0.0, 0.0, "r"))
    for _ in range(max_iter):
        if np.abs(resid).max() < tol and abs(c0) < ctol:
            state.converged = True
            break
        dx, dlam = kkt_step(problem, state, resid, c0, cg)
        y = _normalized(problem, state.x)
        psi = problem.energy(y)
        s = np.sqrt(state.x @ (problem.B @ state.x))
        dpsi = float(problem.gradient(y) @ (dx - y * (y @ (problem.B @ dx)))) / s
        alpha, mode = 1.0, None
        for _ in range(max_halvings + 1):
            x_new = state.x + alpha * dx
            lam_new = state.lam + alpha * dlam
            r_new, c_new, g_new, cg_new = _residual(problem, x_new, lam_new)
            phi_new = float(r_new @ r_new + c_new * c_new)
            if phi_new <= (1.0 - 2.0 * armijo * alpha) * phi:
                mode = "r"
                break
            y_new = _normalized(problem, x_new)
            if problem.energy(y_new) <= psi - armijo * alpha * max(-dpsi, 0.0) and problem.energy(y_new) < psi:
                mode = "e"
                x_new = y_new
                r_new, c_new, g_new, cg_new = _residual(problem, x_new, 0.0)
                lam_new = least_squares_multiplier(g_new, cg_new)
                r_new = g_new + lam_new * cg_new
                phi_new = float(r_new @ r_new + c_new * c_new)
                break
            alpha *= 0.5
        else:
            merits = ", ".join(f"{h[2]:.3e}" for h in state.history[-5:])
            raise LineSearchError(f"line search stalled after {max_halvings} halvings; merit trace: {merits}")
        state.x, state.lam = x_new, lam_new
        resid, c0, cg, phi = r_new, c_new, cg_new, phi_new
        state.iterations += 1
        state.history.append((float(np.abs(resid).max()), abs(c0), phi, state.tau, alpha, mode))
        if callback is not None:
            callback(state)
    else:
        state.converged = bool(np.abs(resid).max() < tol and abs(c0) < ctol)
    return state


# -- outer adaptation loop ----------------------------------------------------------------


def error_schedule(n_adapt: int, eps0: float, eps_last: float, repeat: int = 1) -> list[float]:
    """``eps_k = eps0 (eps_last / eps0)^(k / (n_adapt - 1))``, each repeated ``repeat`` times."""
    if n_adapt <= 0:
        return []
    if n_adapt == 1:
        base = [eps_last]
    else:
        k = np.arange(n_adapt)
        base = list(eps0 * (eps_last / eps0) ** (k / (n_adapt - 1)))
    return [e for e in base for _ in range(repeat)]


@dataclass
class KKTResult:
    u: ComplexField
    lam: float
    states: list
    meshes: list
    converged: bool

    @property
    def constraint(self) -> float:
        return self.states[-1].constraint


def kkt_minimize(
    seed: ComplexField,
    p: ModelParams,
    *,
    inner_max: int = 50,
    n_adapt: int = 4,
    eps0: float = 0.1,
    eps_last: float = 0.005,
    tol: float = 1e-8,
    ctol: float = 1e-10,
    repeat: int = 1,
    adapt: bool = True,
    h_min: float = 1e-3,
    h_max: float = 1.0,
    on_iter: Callable | None = None,
    on_adapt: Callable | None = None,
) -> KKTResult:
    """Newton-KKT solves interleaved with mesh adaptation.

    The mesh is adapted after each inner solve with the scheduled error
    target, then a final inner solve runs on the last mesh.
    """
    from .adapt import adapt_mesh

    u = normalize(seed)
    schedule = error_schedule(n_adapt, eps0, eps_last, repeat) if adapt else []
    states, meshes = [], [u.mesh]
    lam = None
    for k in range(len(schedule) + 1):
        problem = SplitProblem(u.mesh, p)
        cb = None if on_iter is None else (lambda s, prob=problem: on_iter(s, prob))
        state = newton_kkt(problem, problem.from_field(u), lam0=lam, tol=tol, ctol=ctol, max_iter=inner_max, callback=cb)
        states.append(state)
        u = problem.to_field(state.x)
        lam = state.lam
        log.info("KKT stage %d: %d iterations, |grad L| = %.3e, |c| = %.3e", k, state.iterations,
                 state.grad_norm, state.constraint)
        if k == len(schedule):
            break
        mesh, u_new = adapt_mesh(u.mesh, u, schedule[k], h_min=h_min, h_max=h_max)
        if mesh is not u.mesh:
            u = u_new
            meshes.append(mesh)
            if on_adapt is not None:
                on_adapt(u, schedule[k])
    return KKTResult(u, lam, states, meshes, states[-1].converged)
