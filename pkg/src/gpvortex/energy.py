"""Gross-Pitaevskii energy, angular momentum, chemical potential and derivatives.

With ``u = a + i b`` on P1 and operators ``K`` (stiffness), ``M_V``
(mass weighted by the bare trap coefficient ``C_trap``) and the skew
rotation matrix ``S = R - R^T``, the discrete energy is

    E = eps * [ 1/2 a'Ka + 1/2 b'Kb + a'M_V a + b'M_V b
                + C_g/2 int |u|^4 + C_Omega a'S b ]

since ``L_z = -a'S b``.  The quartic term uses a degree-4 rule, exact on P1.

The chemical potential follows from pairing the stationary equation with
``conj(u)`` and integrating: it equals the energy with the interaction
term counted twice.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericError
from .field import ComplexField, fe_data, l2_norm
from .params import ModelParams

QUARTIC_DEGREE = 4
TRAP_DEGREE = 6


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy terms; ``kinetic``, ``potential`` and ``interaction`` are the
    bare integrals, ``rotation`` is the full ``-eps C_Omega L_z`` term."""

    kinetic: float
    potential: float
    interaction: float
    rotation: float
    total: float
    angular_momentum: float
    chemical_potential: float

    def as_dict(self) -> dict:
        return asdict(self)


def _params_key(p: ModelParams):
    return ("trap", p.epsilon, p.a_x_bare, p.a_y_bare, p.a_4)


class EnergyModel:
    """Operators of one mesh and parameter set, reused across evaluations."""

    def __init__(self, mesh, p: ModelParams):
        self.mesh = mesh
        self.p = p
        self.fe = fe_data(mesh)
        self.K = self.fe.stiffness
        self.M = self.fe.mass
        self.S = self.fe.rotation_skew
        self.MV = self.fe.function_mass(p.c_trap, TRAP_DEGREE, key=_params_key(p))

    # pieces ------------------------------------------------------------------

    def _check(self, u: ComplexField):
        if u.mesh is not self.mesh and not u.mesh.same_as(self.mesh):
            raise ValueError("field is not on the model mesh")
        if not np.all(np.isfinite(u.values)):
            raise NumericError("field has non-finite values")

    def quartic_qp(self, u: ComplexField):
        """Real and imaginary parts at the degree-4 quadrature points."""
        return self.fe.at_qp(u.real, QUARTIC_DEGREE), self.fe.at_qp(u.imag, QUARTIC_DEGREE)

    def angular_momentum(self, u: ComplexField) -> float:
        return float(-u.real @ (self.S @ u.imag))

    def _quad_terms(self, u):
        a, b = u.real, u.imag
        kin = 0.5 * (a @ (self.K @ a) + b @ (self.K @ b))
        pot = a @ (self.MV @ a) + b @ (self.MV @ b)
        return float(kin), float(pot)

    def interaction_integral(self, u) -> float:
        """``int |u|^4``."""
        qa, qb = self.quartic_qp(u)
        q = self.fe.quadrature(QUARTIC_DEGREE)
        return q.integrate(np.square(qa * qa + qb * qb))

    # public API ----------------------------------------------------------------

    def energy(self, u: ComplexField, with_mu: bool = True) -> EnergyBreakdown:
        self._check(u)
        p = self.p
        kin, pot = self._quad_terms(u)
        quart = self.interaction_integral(u)
        lz = self.angular_momentum(u)
        inter = 0.5 * p.c_g * quart
        rot = -p.epsilon * p.c_omega * lz
        total = p.epsilon * (kin + pot + inter) + rot
        mu = p.epsilon * (kin + pot + 2.0 * inter) + rot if with_mu else float("nan")
        return EnergyBreakdown(kin, pot, inter, rot, total, lz, mu)

    def total(self, u: ComplexField) -> float:
        return self.energy(u, with_mu=False).total

    def chemical_potential(self, u: ComplexField, tol: float = 1e-10) -> float:
        nrm2 = l2_norm(u) ** 2
        if abs(nrm2 - 1.0) > tol:
            raise NumericError(f"chemical potential needs a unit-norm field, got |u|^2 = {nrm2:.12g}")
        return self.energy(u).chemical_potential

    def quadratic_gradient(self, a, b):
        """Gradient of the quadratic part, as real and imaginary load vectors."""
        p = self.p
        c = p.c_omega
        gr = self.K @ a + 2.0 * (self.MV @ a) + c * (self.S @ b)
        gi = self.K @ b + 2.0 * (self.MV @ b) - c * (self.S @ a)
        return p.epsilon * gr, p.epsilon * gi

    def gradient(self, u: ComplexField) -> np.ndarray:
        """L2 gradient as a complex load vector ``g_r + i g_i``.

        ``dE(u)[v] = g_r . v_r + g_i . v_i`` for any direction ``v``.
        """
        self._check(u)
        p = self.p
        gr, gi = self.quadratic_gradient(u.real, u.imag)
        if p.c_g:
            qa, qb = self.quartic_qp(u)
            rho = qa * qa + qb * qb
            coef = 2.0 * p.epsilon * p.c_g
            gr = gr + coef * self.fe.load(rho * qa, QUARTIC_DEGREE)
            gi = gi + coef * self.fe.load(rho * qb, QUARTIC_DEGREE)
        return gr + 1j * gi

    def hessian(self, u: ComplexField) -> sp.csc_matrix:
        """``2N x 2N`` Hessian of ``E`` in the ``[real; imag]`` block layout."""
        self._check(u)
        p = self.p
        base = self.K + 2.0 * self.MV
        rot = p.c_omega * self.S
        if p.c_g:
            qa, qb = self.quartic_qp(u)
            g = p.c_g
            m_rho = self.fe.weighted_mass(qa * qa + qb * qb, QUARTIC_DEGREE)
            m_aa = self.fe.weighted_mass(qa * qa, QUARTIC_DEGREE)
            m_bb = self.fe.weighted_mass(qb * qb, QUARTIC_DEGREE)
            m_ab = self.fe.weighted_mass(qa * qb, QUARTIC_DEGREE)
            a_rr = base + 2.0 * g * m_rho + 4.0 * g * m_aa
            a_ii = base + 2.0 * g * m_rho + 4.0 * g * m_bb
            off = rot + 4.0 * g * m_ab
            off_t = -rot + 4.0 * g * m_ab
        else:
            a_rr = a_ii = base
            off, off_t = rot, -rot
        return (p.epsilon * sp.bmat([[a_rr, off], [off_t, a_ii]], format="csc")).tocsc()

    def line_polynomial(self, u: ComplexField, d: ComplexField) -> np.ndarray:
        """Coefficients (highest first) of the quartic ``J(chi) = E(u - chi d)``."""
        p = self.p
        a, b = u.real, u.imag
        da, db = d.real, d.imag
        gua, gub = self.quadratic_gradient(a, b)
        gda, gdb = self.quadratic_gradient(da, db)
        e0 = self.total(u)
        bil = 0.5 * (gua @ da + gub @ db)
        qd = 0.5 * (gda @ da + gdb @ db)
        c4 = c3 = c2q = c1q = 0.0
        if p.c_g:
            qa, qb = self.quartic_qp(u)
            ra, rb = self.quartic_qp(d)
            quad = self.fe.quadrature(QUARTIC_DEGREE)
            pp = qa * qa + qb * qb
            qq = qa * ra + qb * rb
            ss = ra * ra + rb * rb
            h = 0.5 * p.epsilon * p.c_g
            c4 = h * quad.integrate(ss * ss)
            c3 = -4.0 * h * quad.integrate(qq * ss)
            c2q = h * quad.integrate(4.0 * qq * qq + 2.0 * pp * ss)
            c1q = -4.0 * h * quad.integrate(pp * qq)
        return np.array([c4, c3, qd + c2q, -2.0 * bil + c1q, e0])

    def energy_covariant(self, u: ComplexField) -> float:
        """Energy in the covariant form with the effective trap.

        Evaluated pointwise at degree-6 quadrature points; it shares no
        operator with :meth:`energy` and serves as an independent check.
        """
        self._check(u)
        p = self.p
        fe = self.fe
        q = fe.quadrature(TRAP_DEGREE)
        tris = self.mesh.triangles
        grad_u = np.einsum("tkd,tk->td", fe.grads, u.values[tris])
        uq = fe.at_qp(u.real, TRAP_DEGREE) + 1j * fe.at_qp(u.imag, TRAP_DEGREE)
        x, y = q.points[..., 0], q.points[..., 1]
        c = p.c_omega
        cx = grad_u[:, None, 0] + 1j * c * y * uq
        cy = grad_u[:, None, 1] - 1j * c * x * uq
        rho = np.abs(uq) ** 2
        dens = 0.5 * (np.abs(cx) ** 2 + np.abs(cy) ** 2) + p.c_trap_eff(x, y) * rho + 0.5 * p.c_g * rho**2
        return p.epsilon * q.integrate(dens)


def energy(u: ComplexField, p: ModelParams) -> EnergyBreakdown:
    return EnergyModel(u.mesh, p).energy(u)


def energy_covariant(u: ComplexField, p: ModelParams) -> float:
    return EnergyModel(u.mesh, p).energy_covariant(u)


def gradient_l2(u: ComplexField, p: ModelParams) -> np.ndarray:
    return EnergyModel(u.mesh, p).gradient(u)


def chemical_potential(u: ComplexField, p: ModelParams) -> float:
    return EnergyModel(u.mesh, p).chemical_potential(u)


def angular_momentum(u: ComplexField) -> float:
    return float(-u.real @ (fe_data(u.mesh).rotation_skew @ u.imag))
