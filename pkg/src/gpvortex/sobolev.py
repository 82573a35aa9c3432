"""Projected Sobolev-gradient descent with an adaptive-mesh ladder.

Each iteration computes the ``H_A`` Riesz representative ``G`` of the
energy derivative, projects it on the tangent space of the unit sphere and
moves along ``-PG`` by the exact minimizer of the quartic ``E(u - chi PG)``.
The ``H_A`` product

    <G, v>_A = Re int (1 + C^2 r^2) G conj(v) + grad G . grad conj(v)
                       - 2 i C (A . grad G) conj(v),      A = (y, -x),

equals ``int |grad G + i C A G|^2 + |G|^2`` on the diagonal, so its real
block matrix ``[[M_w + K, C S], [-C S, M_w + K]]`` is symmetric positive
definite on Dirichlet fields.  It does not depend on ``u``; one sparse LU
per mesh serves every Riesz and projection solve.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .adapt import adapt_mesh
from .energy import EnergyModel
from .errors import NumericError
from .field import ComplexField, fe_data, l2_inner, l2_norm, normalize
from .params import ModelParams
from .post import SolverTrace

log = logging.getLogger(__name__)


class DivergenceError(NumericError):
    pass


class LineSearchFallback(NumericError):
    """No positive root of the line derivative lowers the energy."""


# -- H_A operator ------------------------------------------------------------------------


class HAOperator:
    """Factorized ``H_A`` matrix of one mesh on the interior degrees of freedom."""

    def __init__(self, mesh, p: ModelParams):
        self.mesh = mesh
        fe = fe_data(mesh)
        c = p.c_omega
        self.free = fe.interior
        self.n = mesh.n_vertices
        mw = fe.function_mass(lambda x, y: 1.0 + c * c * (x * x + y * y), degree=4, key=("HA", c))
        diag = (mw + fe.stiffness)[self.free][:, self.free]
        skew = (c * fe.rotation_skew)[self.free][:, self.free]
        self.matrix = sp.bmat([[diag, skew], [-skew, diag]], format="csc")
        m_int = fe.mass[self.free][:, self.free]
        self.mass_block = sp.block_diag([m_int, m_int], format="csr")
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise NumericError(f"H_A factorization failed: {exc}") from None

    def _to_vec(self, z):
        return np.concatenate([z.real[self.free], z.imag[self.free]])

    def _to_field(self, x) -> ComplexField:
        k = len(self.free)
        vals = np.zeros(self.n, dtype=complex)
        vals[self.free] = x[:k] + 1j * x[k:]
        return ComplexField(self.mesh, vals)

    def solve_load(self, load: np.ndarray) -> ComplexField:
        """Field ``G`` with ``<G, v>_A = Re <load, v>`` for all Dirichlet ``v``."""
        return self._to_field(self._lu.solve(self._to_vec(load)))

    def inner(self, u: ComplexField, v: ComplexField) -> float:
        return float(self._to_vec(u.values) @ (self.matrix @ self._to_vec(v.values)))

    def riesz_of_l2(self, u: ComplexField) -> ComplexField:
        """``v`` with ``<v, w>_A = Re <u, w>_{L2}``."""
        return self._to_field(self._lu.solve(self.mass_block @ self._to_vec(u.values)))


def ha_riesz_solve(u: ComplexField, p: ModelParams, op: HAOperator | None = None,
                   model: EnergyModel | None = None) -> ComplexField:
    """``G = grad_A E(u) / (2 eps)``."""
    op = HAOperator(u.mesh, p) if op is None else op
    model = EnergyModel(u.mesh, p) if model is None else model
    return op.solve_load(model.gradient(u) / (2.0 * p.epsilon))


def project_tangent(u: ComplexField, g: ComplexField, p: ModelParams, op: HAOperator | None = None,
                    v_ha: ComplexField | None = None) -> ComplexField:
    """``PG = G - (Re<u, G> / Re<u, v_A>) v_A``; ``PG`` is L2-orthogonal to ``u``."""
    ug = l2_inner(g, u).real
    if ug == 0.0:
        return g
    if v_ha is None:
        op = HAOperator(u.mesh, p) if op is None else op
        v_ha = op.riesz_of_l2(u)
    uv = l2_inner(v_ha, u).real
    if uv == 0.0:
        raise NumericError("degenerate tangent projection: Re<u, v_A> = 0")
    return g - (ug / uv) * v_ha


# -- line search -----------------------------------------------------------------------------


def cubic_real_roots(c3: float, c2: float, c1: float, c0: float) -> np.ndarray:
    """Real roots of ``c3 x^3 + c2 x^2 + c1 x + c0``, closed form with a
    companion-matrix fallback and one Newton polish."""
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return np.zeros(0)
    if abs(c3) <= 1e-14 * scale:
        if abs(c2) <= 1e-14 * scale:
            return np.array([-c0 / c1]) if c1 != 0 else np.zeros(0)
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return np.zeros(0)
        q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
        roots = [q / c2] + ([c0 / q] if q != 0 else [])
        return np.array(sorted(roots))
    a, b, c = c2 / c3, c1 / c3, c0 / c3
    pp = b - a * a / 3.0
    qq = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    shift = -a / 3.0
    with np.errstate(all="ignore"):
        if disc > 0:
            sq = math.sqrt(disc)
            roots = [math.copysign(abs(-qq / 2 + sq) ** (1 / 3), -qq / 2 + sq)
                     + math.copysign(abs(-qq / 2 - sq) ** (1 / 3), -qq / 2 - sq) + shift]
        elif pp == 0.0:
            roots = [shift]
        else:
            r = 2.0 * math.sqrt(-pp / 3.0)
            arg = max(-1.0, min(1.0, 3.0 * qq / (pp * r)))
            phi = math.acos(arg) / 3.0
            roots = [r * math.cos(phi - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    roots = np.array(roots)
    if not np.all(np.isfinite(roots)):
        rr = np.roots([c3, c2, c1, c0])
        roots = rr[np.abs(rr.imag) <= 1e-9 * (1.0 + np.abs(rr.real))].real
    coef = np.array([c3, c2, c1, c0])
    dcoef = np.array([3.0 * c3, 2.0 * c2, c1])
    for _ in range(2):
        d = np.polyval(dcoef, roots)
        step = np.where(d != 0, np.polyval(coef, roots) / np.where(d != 0, d, 1.0), 0.0)
        roots = roots - step
    return np.sort(roots)


@dataclass(frozen=True)
class LineSearchResult:
    chi: float
    energy: float
    fallback: bool
    coefficients: np.ndarray


def cubic_linesearch(u: ComplexField, pg: ComplexField, p: ModelParams, model: EnergyModel | None = None,
                     chi_prev: float | None = None) -> LineSearchResult:
    """Step ``chi`` minimizing ``J(chi) = E(u - chi PG)`` over the positive roots of ``J'``.

    ``J`` is a quartic polynomial assembled exactly.  When no positive root
    lowers the energy, the previous step is halved until it does.
    """
    model = EnergyModel(u.mesh, p) if model is None else model
    poly = model.line_polynomial(u, pg)
    j0 = poly[-1]
    dpoly = np.polyder(poly)
    roots = cubic_real_roots(*np.pad(dpoly, (4 - len(dpoly), 0)))
    best, best_j = None, j0
    for r in roots[roots > 0]:
        jr = float(np.polyval(poly, r))
        if jr < best_j:
            best, best_j = float(r), jr
    if best is not None:
        return LineSearchResult(best, best_j, False, poly)
    chi = chi_prev if chi_prev else 1.0
    for _ in range(60):
        chi *= 0.5
        jr = float(np.polyval(poly, chi))
        if jr < j0:
            return LineSearchResult(chi, jr, True, poly)
    raise LineSearchFallback("no step along -PG lowers the energy")


# -- adaptation ladder ----------------------------------------------------------------------------


class LadderAction(str, enum.Enum):
    NONE = "None"
    ADAPT = "Adapt"
    RELAX = "RelaxLevel"
    ADVANCE = "AdvanceLevel"


@dataclass
class Ladder:
    """Thresholds ``eps^i = eps1 / step^(i-1)`` down to ``eps_c``.

    ``check`` receives the signed relative energy change and uses its
    magnitude.  An adaptation is requested when the change is decreasing and
    lies between the current threshold and the next; after ``n_ad``
    adaptations at one level, or when the change falls below the next
    threshold, the level advances.  A growing change above the current
    threshold steps back one level.
    """

    eps1: float = 1e-2
    eps_c: float = 1e-9
    n_ad: int = 2
    step: float = 2.0
    level: int = 0
    counts: dict = field(default_factory=dict)
    prev: float | None = None

    def __post_init__(self):
        if not (self.eps1 > self.eps_c > 0 and self.step > 1):
            raise ValueError("ladder needs eps1 > eps_c > 0 and step > 1")
        n = int(math.floor(math.log(self.eps1 / self.eps_c) / math.log(self.step))) + 1
        levels = self.eps1 / self.step ** np.arange(n)
        if levels[-1] > self.eps_c:
            levels = np.append(levels, self.eps_c)
        self.thresholds = levels

    def upper(self) -> float:
        return float(self.thresholds[self.level])

    def lower(self) -> float:
        i = min(self.level + 1, len(self.thresholds) - 1)
        return float(self.thresholds[i])

    def reset_history(self) -> None:
        self.prev = None

    def check(self, de: float) -> LadderAction:
        d = abs(de)
        prev, self.prev = self.prev, d
        if prev is None or d < self.eps_c:
            return LadderAction.NONE
        last = len(self.thresholds) - 1
        if d > prev:
            if d > self.upper() and self.level > 0:
                self.level -= 1
                return LadderAction.RELAX
            return LadderAction.NONE
        if self.level >= last:
            return LadderAction.NONE
        if d <= self.lower():
            self.level += 1
            return LadderAction.ADVANCE
        if d < self.upper():
            done = self.counts.get(self.level, 0)
            if done >= self.n_ad:
                self.level += 1
                return LadderAction.ADVANCE
            self.counts[self.level] = done + 1
            return LadderAction.ADAPT
        return LadderAction.NONE


def ladder_check(de: float, ladder: Ladder) -> LadderAction:
    return ladder.check(de)


# -- descent loop ------------------------------------------------------------------------------------


@dataclass
class DescentOptions:
    eps_c: float = 1e-9
    max_iter: int = 8000
    iter_norm: int = 100
    norm_tol: float = 1e-10
    adapt: bool = True
    err_adapt: float = 0.1
    h_min: float = 1e-3
    h_max: float = 1.0
    ladder: Ladder | None = None
    budget: int = 400_000
    iter_adapt: int = 0  # forced adaptation period, 0 disables


@dataclass
class DescentState:
    u: ComplexField
    iteration: int = 0
    energies: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    trace: SolverTrace = field(default_factory=SolverTrace)
    adaptations: int = 0
    converged: bool = False
    fallbacks: int = 0
    chi: float | None = None

    @property
    def mesh(self):
        return self.u.mesh


def relative_change(e_new: float, e_old: float) -> tuple[float, bool]:
    """``(E_new - E_old) / E_new``; absolute difference when ``|E_new|`` is tiny."""
    if abs(e_new) < 1e-12:
        return e_new - e_old, True
    return (e_new - e_old) / e_new, False


def descend(
    state: DescentState,
    p: ModelParams,
    opts: DescentOptions | None = None,
    on_iter: Callable | None = None,
) -> DescentState:
    """Run the projected descent until ``|dE| < eps_c`` or ``max_iter``."""
    opts = DescentOptions() if opts is None else opts
    ladder = opts.ladder if opts.ladder is not None else Ladder(eps_c=opts.eps_c)
    u = normalize(state.u)
    model = EnergyModel(u.mesh, p)
    op = HAOperator(u.mesh, p)
    e_old = model.total(u)
    if not state.trace.rows:
        state.trace.add(iter=0, energy=e_old, dE=0.0, Lz=model.angular_momentum(u), norm=l2_norm(u),
                        nv=u.mesh.n_vertices, event="step")
    if not state.energies:
        state.energies.append(e_old)
    last_adapt = state.iteration
    for _ in range(opts.max_iter):
        g = op.solve_load(model.gradient(u) / (2.0 * p.epsilon))
        pg = project_tangent(u, g, p, v_ha=op.riesz_of_l2(u))
        try:
            ls = cubic_linesearch(u, pg, p, model, state.chi)
        except LineSearchFallback:
            if l2_norm(pg) < 1e-14:
                state.converged = True
                break
            raise DivergenceError(
                f"energy cannot be lowered at iteration {state.iteration}; last energies {state.energies[-3:]}"
            ) from None
        state.fallbacks += ls.fallback
        state.chi = ls.chi
        u = ComplexField(u.mesh, u.values - ls.chi * pg.values)
        event = "step"
        nrm = l2_norm(u)
        if (state.iteration + 1) % opts.iter_norm == 0 or abs(nrm - 1.0) > opts.norm_tol:
            u = ComplexField(u.mesh, u.values / nrm)
            event = "renorm"
            nrm = l2_norm(u)
        state.iteration += 1
        e_new = model.total(u)
        if not np.isfinite(e_new):
            raise DivergenceError(f"non-finite energy at iteration {state.iteration}")
        de, _ = relative_change(e_new, e_old)
        state.energies.append(e_new)
        state.deltas.append(de)
        state.trace.add(iter=state.trace.next_iter, energy=e_new, dE=de, Lz=model.angular_momentum(u), norm=nrm,
                        nv=u.mesh.n_vertices, event=event)
        state.u = u
        if on_iter is not None:
            on_iter(state)
        e_old = e_new
        if abs(de) < opts.eps_c:
            state.converged = True
            break
        action = ladder.check(de)
        forced = opts.iter_adapt > 0 and state.iteration - last_adapt >= opts.iter_adapt
        if opts.adapt and (action is LadderAction.ADAPT or forced):
            last_adapt = state.iteration
            mesh, u_new = adapt_mesh(u.mesh, u, opts.err_adapt, h_min=opts.h_min, h_max=opts.h_max,
                                     budget=opts.budget)
            ladder.reset_history()
            if mesh is u.mesh:
                continue
            u = u_new
            model = EnergyModel(mesh, p)
            op = HAOperator(mesh, p)
            e_old = model.total(u)
            state.adaptations += 1
            state.u = u
            state.chi = None
            state.trace.add(iter=state.trace.next_iter, energy=e_old, dE=0.0,
                            Lz=model.angular_momentum(u), norm=l2_norm(u), nv=mesh.n_vertices, event="adapt")
            log.info("adapted mesh at iteration %d: %d vertices", state.iteration, mesh.n_vertices)
    state.u = u
    return state
