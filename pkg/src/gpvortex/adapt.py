"""Hessian-based error indicator and refinement-only mesh adaptation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .field import ComplexField, fe_data, normalize
from .mesh import TriMesh, bisect_refine, closure, transfer_field

DEFAULT_BUDGET = 400_000


class BudgetError(NumericError):
    """Refinement would exceed the vertex budget."""


@dataclass(frozen=True)
class ErrorIndicator:
    """Per-triangle scores with the clamps used for marking."""

    scores: np.ndarray
    h: np.ndarray
    eps_target: float = np.inf
    h_min: float = 1e-3
    h_max: float = 1.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise NumericError("indicator scores must be finite and non-negative")
        if not self.h_min < self.h_max:
            raise ConfigError("h_min must be smaller than h_max")


def recover_gradient(m: TriMesh, values: np.ndarray) -> np.ndarray:
    """Area-weighted average of the element gradients at each vertex, shape (N, 2)."""
    g = fe_data(m).grads
    tri_grad = np.einsum("tkd,tk->td", g, values[m.triangles])
    w = m.areas
    out = np.zeros((m.n_vertices, 2))
    wsum = np.bincount(m.triangles.ravel(), weights=np.repeat(w, 3), minlength=m.n_vertices)
    for d in range(2):
        out[:, d] = np.bincount(
            m.triangles.ravel(), weights=np.repeat(w * tri_grad[:, d], 3), minlength=m.n_vertices
        )
    return out / wsum[:, None]


def recover_hessian(m: TriMesh, values: np.ndarray) -> np.ndarray:
    """Vertex Hessians by recovering the gradient twice, symmetrized, shape (N, 2, 2)."""
    g = recover_gradient(m, values)
    hx = recover_gradient(m, g[:, 0])
    hy = recover_gradient(m, g[:, 1])
    hess = np.stack([hx, hy], axis=1)
    return 0.5 * (hess + np.transpose(hess, (0, 2, 1)))


def hessian_indicator(u: ComplexField, eps_target=np.inf, h_min=1e-3, h_max=1.0) -> ErrorIndicator:
    """Score ``h_T^2 * mean_vertices ||H(|u|^2)||_F / max |u|^2`` per triangle.

    Dividing by the peak density makes the score independent of the scaling.
    """
    m = u.mesh
    rho = np.abs(u.values) ** 2
    peak = rho.max()
    hnorm = np.linalg.norm(recover_hessian(m, rho), axis=(1, 2))
    h = m.triangle_diameters()
    if peak > 0:
        scores = h * h * hnorm[m.triangles].mean(axis=1) / peak
    else:
        scores = np.zeros(m.n_triangles)
    return ErrorIndicator(scores, h, eps_target, h_min, h_max)


def dorfler_set(scores: np.ndarray, theta: float = 0.5) -> np.ndarray:
    """Smallest set of triangles whose scores sum to ``theta`` of the total."""
    total = scores.sum()
    if total <= 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    cum = np.cumsum(scores[order])
    k = int(np.searchsorted(cum, theta * total)) + 1
    return np.sort(order[:k])


def mark(ind: ErrorIndicator, theta: float = 0.5) -> np.ndarray:
    """Triangles above ``eps_target`` within the Doerfler set, plus oversized ones."""
    if not np.isfinite(ind.eps_target):
        big = np.flatnonzero(ind.h > ind.h_max)
        return big
    chosen = np.zeros(len(ind.scores), dtype=bool)
    chosen[dorfler_set(ind.scores, theta)] = True
    chosen &= ind.scores > ind.eps_target
    chosen |= ind.h > ind.h_max
    chosen &= ind.h >= ind.h_min
    return np.flatnonzero(chosen)


def adapt_mesh(
    m: TriMesh,
    u: ComplexField,
    eps_target: float,
    h_min: float = 1e-3,
    h_max: float = 1.0,
    budget: int = DEFAULT_BUDGET,
    theta: float = 0.5,
):
    """One marking/refinement pass.  Returns ``(mesh, field)``; the field is
    interpolated, zeroed on the boundary and renormalized."""
    ind = hessian_indicator(u, eps_target, h_min, h_max)
    marked = mark(ind, theta)
    if marked.size == 0:
        return m, u
    added = int(closure(m, marked).sum())
    if m.n_vertices + added > budget:
        raise BudgetError(f"refinement to {m.n_vertices + added} vertices exceeds the budget of {budget}")
    new_mesh = bisect_refine(m, marked)
    v = transfer_field(m, u, new_mesh)
    v.values[new_mesh.boundary] = 0.0
    return new_mesh, normalize(v)
