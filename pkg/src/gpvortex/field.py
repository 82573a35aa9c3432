"""P1 complex fields, triangle quadrature and sparse operator assembly.

Complex fields are stored as one complex vertex vector; operators are real
``N x N`` scipy CSR matrices acting on the real and imaginary parts alike.
Coupled solves use the ``2N x 2N`` block form ``[real; imag]``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConfigError, MeshError, NumericError
from .mesh import TriMesh

FIELD_HEADER = "GPV-SOL 1"


# -- quadrature -----------------------------------------------------------------


def _perm3(a, b, c):
    """Distinct permutations of a barycentric triple."""
    out = []
    for t in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
        if t not in out:
            out.append(t)
    return out


def _rule(groups):
    bary, w = [], []
    for triple, weight in groups:
        for t in _perm3(*triple):
            bary.append(t)
            w.append(weight)
    return np.array(bary), np.array(w)


_RULES = {
    1: _rule([((1 / 3, 1 / 3, 1 / 3), 1.0)]),
    2: _rule([((1 / 6, 1 / 6, 2 / 3), 1 / 3)]),
    4: _rule(
        [
            ((0.445948490915965, 0.445948490915965, 0.108103018168070), 0.223381589678011),
            ((0.091576213509771, 0.091576213509771, 0.816847572980459), 0.109951743655322),
        ]
    ),
    5: _rule(
        [
            ((1 / 3, 1 / 3, 1 / 3), 0.225),
            ((0.470142064105115, 0.470142064105115, 0.059715871789770), 0.132394152788506),
            ((0.101286507323456, 0.101286507323456, 0.797426985353087), 0.125939180544827),
        ]
    ),
    6: _rule(
        [
            ((0.249286745170910, 0.249286745170910, 0.501426509658179), 0.116786275726379),
            ((0.063089014491502, 0.063089014491502, 0.873821971016996), 0.050844906370207),
            ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374),
        ]
    ),
}
_RULES[3] = _RULES[4]


def triangle_rule(degree: int):
    """Symmetric rule exact to ``degree``: barycentric points (q, 3), weights summing to 1."""
    if degree not in _RULES:
        raise ConfigError(f"no triangle quadrature rule of degree {degree} (supported: 1-6)")
    bary, w = _RULES[degree]
    return bary.copy(), w.copy()


@dataclass(frozen=True)
class MeshQuadrature:
    """A triangle rule mapped onto every element of a mesh.

    ``weights[t, q]`` already includes the triangle area.
    """

    bary: np.ndarray
    weights: np.ndarray
    points: np.ndarray

    def integrate(self, values_at_qp) -> float:
        return float(np.sum(self.weights * values_at_qp))


def functional_quadrature(m: TriMesh, degree: int) -> MeshQuadrature:
    return fe_data(m).quadrature(degree)


# -- fields -----------------------------------------------------------------------


class ComplexField:
    """Complex P1 field; ``values[i]`` is the value at vertex ``i``."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: TriMesh, values):
        vals = np.array(values, dtype=complex)
        if vals.shape != (mesh.n_vertices,):
            raise MeshError(f"field has {vals.shape} values, mesh has {mesh.n_vertices} vertices")
        self.mesh = mesh
        self.values = vals

    @classmethod
    def from_parts(cls, mesh, real, imag=None):
        imag = np.zeros(mesh.n_vertices) if imag is None else imag
        return cls(mesh, np.asarray(real) + 1j * np.asarray(imag))

    @classmethod
    def from_function(cls, mesh, func, dirichlet=True):
        vals = np.asarray(func(mesh.points[:, 0], mesh.points[:, 1]), dtype=complex)
        vals = np.broadcast_to(vals, (mesh.n_vertices,)).copy()
        if dirichlet:
            vals[mesh.boundary] = 0.0
        return cls(mesh, vals)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def copy(self) -> "ComplexField":
        return ComplexField(self.mesh, self.values.copy())

    def _check(self, other):
        if other.mesh is not self.mesh and not other.mesh.same_as(self.mesh):
            raise MeshError("fields live on different meshes")

    def __add__(self, other):
        self._check(other)
        return ComplexField(self.mesh, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ComplexField(self.mesh, self.values - other.values)

    def __mul__(self, scalar):
        return ComplexField(self.mesh, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexField(self.mesh, -self.values)

    def __repr__(self):
        return f"ComplexField(nv={self.mesh.n_vertices})"


# -- per-mesh operator cache -----------------------------------------------------


def _p1_geometry(m: TriMesh):
    """Gradients of the hat functions per triangle, shape (T, 3, 2)."""
    p = m.points[m.triangles]
    area = m.areas
    tiny = 1e-14 * max(m.diameter, 1.0) ** 2
    bad = np.flatnonzero(area <= tiny)
    if bad.size:
        raise MeshError(f"degenerate triangle {bad[0]} (area {area[bad[0]]:.3e})")
    grads = np.empty((len(p), 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / (2.0 * area)
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / (2.0 * area)
    return grads


class FEData:
    """Assembled P1 operators of one mesh, built lazily and cached."""

    def __init__(self, m: TriMesh):
        self._mesh = weakref.ref(m)
        self._quad = {}
        self._pos_cache = {}

    @property
    def mesh(self) -> TriMesh:
        m = self._mesh()
        if m is None:
            raise MeshError("mesh was garbage collected")
        return m

    @cached_property
    def grads(self):
        return _p1_geometry(self.mesh)

    @cached_property
    def _pattern(self):
        m = self.mesh
        n = m.n_vertices
        t = m.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        keys = rows * n + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        urow, ucol = np.divmod(uniq, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, urow + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, ucol.astype(np.int64), inv.ravel(), len(uniq)

    def from_local(self, local) -> sp.csr_matrix:
        """Assemble (T, 3, 3) element matrices into a CSR matrix."""
        indptr, indices, inv, nnz = self._pattern
        data = np.bincount(inv, weights=np.asarray(local).ravel(), minlength=nnz)
        n = self.mesh.n_vertices
        return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(n, n))

    def quadrature(self, degree: int) -> MeshQuadrature:
        if degree not in self._quad:
            m = self.mesh
            bary, w = triangle_rule(degree)
            pts = np.einsum("qk,tkd->tqd", bary, m.points[m.triangles])
            self._quad[degree] = MeshQuadrature(bary, m.areas[:, None] * w[None, :], pts)
        return self._quad[degree]

    @cached_property
    def mass(self) -> sp.csr_matrix:
        area = self.mesh.areas
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        return self.from_local(area[:, None, None] * ref[None])

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        g = self.grads
        local = self.mesh.areas[:, None, None] * np.einsum("tad,tbd->tab", g, g)
        return self.from_local(local)

    @cached_property
    def rotation(self) -> sp.csr_matrix:
        """``R_ij = int phi_i (y d_x phi_j - x d_y phi_j)``, integrated exactly."""
        m = self.mesh
        p = m.points[m.triangles]
        area = m.areas
        # int_T phi_i x = area/12 (sum_k x_k + x_i)
        mx = area[:, None] / 12.0 * (p[:, :, 0].sum(axis=1)[:, None] + p[:, :, 0])
        my = area[:, None] / 12.0 * (p[:, :, 1].sum(axis=1)[:, None] + p[:, :, 1])
        g = self.grads
        local = my[:, :, None] * g[:, None, :, 0] - mx[:, :, None] * g[:, None, :, 1]
        return self.from_local(local)

    @cached_property
    def rotation_skew(self) -> sp.csr_matrix:
        """``S = R - R^T``; ``L_z = -u_r^T S u_i`` for Dirichlet fields."""
        r = self.rotation
        return (r - r.T).tocsr()

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.mesh.boundary)

    def weighted_mass(self, coef_at_qp, degree: int) -> sp.csr_matrix:
        """``int w phi_i phi_j`` from ``w`` sampled at the degree-``degree`` points."""
        q = self.quadrature(degree)
        local = kernels.weighted_mass_local(self.mesh.triangles, q.bary, q.weights * coef_at_qp)
        return self.from_local(local)

    def function_mass(self, func, degree: int = 6, key=None) -> sp.csr_matrix:
        """Weighted mass for an analytic weight ``func(x, y)``; cached when ``key`` is given."""
        if key is not None and key in self._pos_cache:
            return self._pos_cache[key]
        q = self.quadrature(degree)
        mat = self.weighted_mass(func(q.points[..., 0], q.points[..., 1]), degree)
        if key is not None:
            self._pos_cache[key] = mat
        return mat

    def at_qp(self, values, degree: int) -> np.ndarray:
        """Real vertex data evaluated at the quadrature points (T, q)."""
        q = self.quadrature(degree)
        return kernels.eval_at_qp(self.mesh.triangles, q.bary, values)

    def load(self, coef_at_qp, degree: int) -> np.ndarray:
        """``b_i = int f phi_i`` for ``f`` sampled at the quadrature points."""
        q = self.quadrature(degree)
        return kernels.scatter_load(self.mesh.triangles, q.bary, q.weights * coef_at_qp, self.mesh.n_vertices)


_FE_CACHE: "weakref.WeakKeyDictionary[TriMesh, FEData]" = weakref.WeakKeyDictionary()


def fe_data(m: TriMesh) -> FEData:
    data = _FE_CACHE.get(m)
    if data is None:
        data = FEData(m)
        _FE_CACHE[m] = data
    return data


def assemble_mass_stiffness(m: TriMesh):
    """P1 mass and stiffness matrices (exact integration)."""
    d = fe_data(m)
    return d.mass, d.stiffness


def assemble_rotation(m: TriMesh):
    return fe_data(m).rotation


def block2(a, b=None, c=None, d=None):
    """``[[a, b], [c, d]]`` with ``None`` off-diagonal blocks as zeros; ``d`` defaults to ``a``."""
    d = a if d is None else d
    return sp.bmat([[a, b], [c, d]], format="csc")


# -- inner products -------------------------------------------------------------------


def l2_inner(u: ComplexField, v: ComplexField) -> complex:
    """``int u conj(v)`` through the mass matrix."""
    u._check(v)
    mass = fe_data(u.mesh).mass
    return complex(u.values @ (mass @ np.conj(v.values)))


def l2_norm(u: ComplexField) -> float:
    mass = fe_data(u.mesh).mass
    val = np.real(np.vdot(u.values, mass @ u.values))
    return float(np.sqrt(max(val, 0.0)))


def normalize(u: ComplexField) -> ComplexField:
    nrm = l2_norm(u)
    if not np.isfinite(nrm):
        raise NumericError("cannot normalize a non-finite field")
    if nrm == 0.0:
        raise NumericError("cannot normalize the zero field")
    out = ComplexField(u.mesh, u.values / nrm)
    # second pass removes the last rounding of the division
    return ComplexField(u.mesh, out.values / l2_norm(out))


# -- serialization ------------------------------------------------------------------------


def write_field(path, u: ComplexField) -> None:
    lines = [FIELD_HEADER, str(u.mesh.n_vertices)]
    lines += [f"{z.real:.17g} {z.imag:.17g}" for z in u.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path, mesh: TriMesh) -> ComplexField:
    try:
        text = Path(path).read_text().split("\n")
    except OSError as exc:
        raise ConfigError(f"cannot read solution file {path}: {exc}") from None
    if not text or text[0].strip() != FIELD_HEADER:
        found = text[0].strip() if text else ""
        raise ConfigError(f"{path}: expected header '{FIELD_HEADER}', found {found!r}")
    try:
        n = int(text[1])
        data = np.loadtxt(text[2 : 2 + n], ndmin=2)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed solution file ({exc})") from None
    if n != mesh.n_vertices or data.shape != (n, 2):
        raise ConfigError(f"{path}: {n} values do not match a mesh of {mesh.n_vertices} vertices")
    return ComplexField(mesh, data[:, 0] + 1j * data[:, 1])
