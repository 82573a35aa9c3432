"""NumPy implementations of the element kernels (fallback for the compiled module)."""
import numpy as np


def eval_at_qp(tris, bary, vals):
    """P1 values at the quadrature points, shape (T, q)."""
    return vals[tris] @ bary.T


def scatter_load(tris, bary, coef, n):
    """``b_i = sum_T sum_q coef[T, q] * bary[q, k]`` over corners ``tris[T, k] = i``."""
    local = coef @ bary
    return np.bincount(tris.ravel(), weights=local.ravel(), minlength=n)


def weighted_mass_local(tris, bary, coef):
    """Local matrices ``sum_q coef[T, q] * bary[q, a] * bary[q, b]``, shape (T, 3, 3)."""
    return np.einsum("tq,qa,qb->tab", coef, bary, bary)


def triangle_winding(tris, re, im):
    """Sum of phase jumps around each triangle, in units of 2 pi."""
    # per-vertex angles keep the loop sum integral even where u vanishes
    ang = np.arctan2(im, re)
    out = np.zeros(len(tris))
    for k in range(3):
        d = ang[tris[:, (k + 1) % 3]] - ang[tris[:, k]]
        out += (d + np.pi) % (2.0 * np.pi) - np.pi
    return out / (2.0 * np.pi)
