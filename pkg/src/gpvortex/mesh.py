"""Triangular meshes of elliptical domains.

Meshes are built from concentric elliptical rings, refined by newest-vertex
bisection and serialized in a small text format.  Triangles are stored as
``[p0, p1, p2]`` in counterclockwise order; the edge ``p0-p1`` is the
refinement edge of the triangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InterpolationError, MeshError

MESH_HEADER = "GPV-MESH 1"


def _signed_areas(points, tris):
    p0, p1, p2 = points[tris[:, 0]], points[tris[:, 1]], points[tris[:, 2]]
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


class TriMesh:
    """Immutable conforming P1 triangulation.

    Parameters
    ----------
    points : (N, 2) array
    triangles : (T, 3) int array, counterclockwise
    boundary : (N,) bool array, optional
        Derived from the edge structure when omitted.
    axes : (a, b), optional
        Semi-axes of the analytic ellipse new boundary vertices are snapped to.
    generation : int
        Number of refinement passes since construction.
    """

    def __init__(self, points, triangles, boundary=None, axes=None, generation=0):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise MeshError("points must have shape (N, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.points)):
            raise MeshError("triangle index out of range")
        areas = _signed_areas(self.points, self.triangles)
        bad = np.flatnonzero(areas <= 0)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:.3e}")
        self.areas = areas
        if boundary is None:
            boundary = np.zeros(len(self.points), dtype=bool)
            boundary[self.edges[self.boundary_edges].ravel()] = True
        self.boundary = np.asarray(boundary, dtype=bool)
        if self.boundary.shape != (len(self.points),):
            raise MeshError("boundary flag array has wrong length")
        self.axes = None if axes is None else (float(axes[0]), float(axes[1]))
        self.generation = int(generation)
        for arr in (self.points, self.triangles, self.boundary, self.areas):
            arr.flags.writeable = False

    # sizes ----------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    # edge structure ---------------------------------------------------------

    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge k joins (p_k, p_{k+1}); edge 0 is the refinement edge
        pairs = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        edges, inv, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        return edges, inv.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """(T, 3) edge ids; column k is the edge ``p_k - p_{k+1}``."""
        return self._edge_data[1]

    @property
    def edge_counts(self) -> np.ndarray:
        return self._edge_data[2]

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_counts == 1)

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(E, 2) adjacent triangles per edge, -1 where absent."""
        out = -np.ones((len(self.edges), 2), dtype=np.int64)
        flat = self.tri_edges.ravel()
        tri = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat, kind="stable")
        flat, tri = flat[order], tri[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        out[flat[first], 0] = tri[first]
        out[flat[~first], 1] = tri[~first]
        return out

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.points[e[:, 1]] - self.points[e[:, 0]], axis=1)

    def triangle_diameters(self) -> np.ndarray:
        """Longest edge per triangle."""
        return self.edge_lengths()[self.tri_edges].max(axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.points[self.triangles].mean(axis=1)

    @cached_property
    def _tree(self):
        return cKDTree(self.centroids)

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each triangle (radians)."""
        p = self.points[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(angles, axis=0)

    def same_as(self, other: "TriMesh") -> bool:
        return (
            self is other
            or (
                self.points.shape == other.points.shape
                and self.triangles.shape == other.triangles.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.triangles, other.triangles)
            )
        )

    def __repr__(self):
        return f"TriMesh(nv={self.n_vertices}, nt={self.n_triangles}, generation={self.generation})"


def audit_conformity(m: TriMesh) -> None:
    """Raise :class:`MeshError` unless ``m`` is a conforming disk triangulation.

    Checks that no edge is shared by more than two triangles, that the
    boundary flags match the vertices of single-use edges, and that the
    Euler characteristic ``V - E + T`` equals one.  A hanging node makes
    the edge count too large, so it fails the Euler check.
    """
    counts = m.edge_counts
    if np.any(counts > 2):
        raise MeshError(f"{int(np.sum(counts > 2))} edges are shared by more than two triangles")
    on_bnd = np.zeros(m.n_vertices, dtype=bool)
    on_bnd[m.edges[m.boundary_edges].ravel()] = True
    if not np.array_equal(on_bnd, m.boundary):
        raise MeshError("boundary flags disagree with the edge structure")
    used = np.zeros(m.n_vertices, dtype=bool)
    used[m.triangles.ravel()] = True
    if not used.all():
        raise MeshError(f"{int((~used).sum())} vertices belong to no triangle")
    chi = m.n_vertices - len(m.edges) + m.n_triangles
    if chi != 1:
        raise MeshError(f"Euler characteristic V - E + T = {chi}, expected 1")


# -- construction -----------------------------------------------------------------


def _longest_edge_first(points, tris):
    """Rotate each triangle cyclically so that ``p0-p1`` is its longest edge."""
    p = points[tris]
    lens = np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)], axis=1)
    k = np.argmax(lens, axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(tris, idx, axis=1)


def make_ellipse_mesh(r_x: float, r_y: float, nbseg: int, inflation: float = 1.0) -> TriMesh:
    """Ring mesh of the ellipse with semi-axes ``inflation * (r_x, r_y)``.

    The boundary polygon has ``nbseg`` vertices.  ``ceil(nbseg / 2 pi)``
    rings are placed at equal parametric spacing; ring ``k`` carries about
    ``nbseg * k / n_rings`` vertices, so the vertex spacing is nearly uniform.
    """
    if not (r_x > 0 and r_y > 0):
        raise ConfigError("ellipse radii must be positive")
    if int(nbseg) != nbseg or nbseg < 8:
        raise ConfigError(f"nbseg must be an integer >= 8, got {nbseg}")
    if inflation < 1:
        raise ConfigError("inflation factor must be >= 1")
    nbseg = int(nbseg)
    a, b = inflation * r_x, inflation * r_y
    n_rings = math.ceil(nbseg / (2.0 * math.pi))

    points = [np.zeros((1, 2))]
    rings = []
    thetas = []
    start = 1
    for k in range(1, n_rings + 1):
        n_k = nbseg if k == n_rings else max(3, round(nbseg * k / n_rings))
        offset = 0.0 if (n_rings - k) % 2 == 0 else math.pi / n_k
        th = offset + 2.0 * math.pi * np.arange(n_k) / n_k
        s = k / n_rings
        points.append(np.column_stack([a * s * np.cos(th), b * s * np.sin(th)]))
        rings.append(np.arange(start, start + n_k))
        thetas.append(th)
        start += n_k
    points = np.vstack(points)

    tris = []
    first = rings[0]
    for j in range(len(first)):
        tris.append((0, first[j], first[(j + 1) % len(first)]))
    for inner, outer, th_in, th_out in zip(rings[:-1], rings[1:], thetas[:-1], thetas[1:]):
        n_in, n_out = len(inner), len(outer)
        step_in, step_out = 2.0 * math.pi / n_in, 2.0 * math.pi / n_out
        i = j = 0
        while i < n_in or j < n_out:
            next_in = th_in[0] + (i + 1) * step_in
            next_out = th_out[0] + (j + 1) * step_out
            if j >= n_out or (i < n_in and next_in < next_out):
                tris.append((inner[i % n_in], inner[(i + 1) % n_in], outer[j % n_out]))
                i += 1
            else:
                tris.append((inner[i % n_in], outer[j % n_out], outer[(j + 1) % n_out]))
                j += 1
    tris = np.array(tris, dtype=np.int64)
    flip = _signed_areas(points, tris) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    tris = _longest_edge_first(points, tris)
    boundary = np.zeros(len(points), dtype=bool)
    boundary[rings[-1]] = True
    return TriMesh(points, tris, boundary=boundary, axes=(a, b))


def fit_ellipse_axes(m: TriMesh) -> tuple[float, float]:
    """Least-squares axis-aligned ellipse through the boundary vertices."""
    p = m.points[m.boundary]
    if len(p) < 2:
        raise MeshError("too few boundary vertices to fit an ellipse")
    coef, *_ = np.linalg.lstsq(np.square(p), np.ones(len(p)), rcond=None)
    if np.any(coef <= 0):
        raise MeshError("boundary is not an axis-aligned ellipse")
    return float(coef[0] ** -0.5), float(coef[1] ** -0.5)


def _snap(points, axes):
    a, b = axes
    scale = np.sqrt((points[:, 0] / a) ** 2 + (points[:, 1] / b) ** 2)
    return points / scale[:, None]


# -- newest-vertex bisection ---------------------------------------------------------


def closure(m: TriMesh, marked) -> np.ndarray:
    """Edge marks after closure: any triangle with a marked edge gets its
    refinement edge marked too."""
    tri_edges = m.tri_edges
    flags = np.zeros(len(m.edges), dtype=bool)
    marked = np.asarray(marked, dtype=np.int64).ravel()
    flags[tri_edges[marked, 0]] = True
    while True:
        hit = flags[tri_edges].any(axis=1)
        need = tri_edges[hit, 0]
        if flags[need].all():
            return flags
        flags[need] = True


def bisect_refine(m: TriMesh, marked, snap: bool = True) -> TriMesh:
    """Newest-vertex bisection of the ``marked`` triangles plus closure.

    Each triangle is split once along its refinement edge, and each child is
    split again when its own refinement edge (an original side) is marked,
    so one pass always yields a conforming mesh.  Boundary midpoints are
    projected onto the analytic ellipse when ``snap`` is true and the mesh
    knows its axes.
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64).ravel())
    if marked.size == 0:
        return m
    if marked.min() < 0 or marked.max() >= m.n_triangles:
        raise MeshError("marked triangle index out of range")
    flags = closure(m, marked)
    edge_ids = np.flatnonzero(flags)
    mid = -np.ones(len(m.edges), dtype=np.int64)
    mid[edge_ids] = m.n_vertices + np.arange(len(edge_ids))
    e = m.edges[edge_ids]
    new_pts = 0.5 * (m.points[e[:, 0]] + m.points[e[:, 1]])
    new_bnd = m.edge_counts[edge_ids] == 1
    axes = m.axes
    if snap and axes is not None and new_bnd.any():
        new_pts[new_bnd] = _snap(new_pts[new_bnd], axes)

    t, te = m.triangles, m.tri_edges
    p0, p1, p2 = t[:, 0], t[:, 1], t[:, 2]
    m0, m1, m2 = mid[te[:, 0]], mid[te[:, 1]], mid[te[:, 2]]
    split = m0 >= 0
    keep = t[~split]
    s = split
    left_split = s & (m2 >= 0)  # child [p2, p0, m0], refinement edge p2-p0
    right_split = s & (m1 >= 0)  # child [p1, p2, m0], refinement edge p1-p2
    pieces = [keep]
    lo = s & ~left_split
    pieces.append(np.column_stack([p2[lo], p0[lo], m0[lo]]))
    lo = left_split
    pieces.append(np.column_stack([m0[lo], p2[lo], m2[lo]]))
    pieces.append(np.column_stack([p0[lo], m0[lo], m2[lo]]))
    ro = s & ~right_split
    pieces.append(np.column_stack([p1[ro], p2[ro], m0[ro]]))
    ro = right_split
    pieces.append(np.column_stack([m0[ro], p1[ro], m1[ro]]))
    pieces.append(np.column_stack([p2[ro], m0[ro], m1[ro]]))

    points = np.vstack([m.points, new_pts])
    boundary = np.concatenate([m.boundary, new_bnd])
    return TriMesh(points, np.vstack(pieces), boundary=boundary, axes=axes, generation=m.generation + 1)


def refine_uniform(m: TriMesh, times: int = 1) -> TriMesh:
    for _ in range(times):
        m = bisect_refine(m, np.arange(m.n_triangles))
    return m


# -- point location and transfer -------------------------------------------------------


def _barycentric(points, tris, xy):
    """Barycentric coordinates of ``xy[i]`` in triangle ``tris[i]``."""
    p0, p1, p2 = points[tris[..., 0]], points[tris[..., 1]], points[tris[..., 2]]
    d1, d2, dp = p1 - p0, p2 - p0, xy - p0
    det = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    l1 = (dp[..., 0] * d2[..., 1] - dp[..., 1] * d2[..., 0]) / det
    l2 = (d1[..., 0] * dp[..., 1] - d1[..., 1] * dp[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def _point_triangle_distance(tri_pts, xy):
    """Euclidean distance from ``xy`` to a triangle given by its corners."""
    best = np.inf
    for k in range(3):
        a, b = tri_pts[k], tri_pts[(k + 1) % 3]
        ab = b - a
        s = np.clip(np.dot(xy - a, ab) / np.dot(ab, ab), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(xy - (a + s * ab))))
    return best


def locate(m: TriMesh, xy, *, k: int = 12, tol: float = 1e-12):
    """Containing triangle and barycentric weights for each query point.

    Returns ``(tri, bary, inside)``.  Points outside the mesh get the nearest
    triangle (by distance) and barycentric weights that extrapolate linearly;
    ``inside`` is false for them.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    n = len(xy)
    tri = -np.ones(n, dtype=np.int64)
    bary = np.zeros((n, 3))
    k = min(k, m.n_triangles)
    _, cand = m._tree.query(xy, k=k)
    cand = np.asarray(cand).reshape(n, k)
    lam = _barycentric(m.points, m.triangles[cand], xy[:, None, :])
    ok = lam.min(axis=2) >= -tol
    has = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    rows = np.flatnonzero(has)
    tri[rows] = cand[rows, first[rows]]
    bary[rows] = lam[rows, first[rows]]
    inside = has.copy()
    for i in np.flatnonzero(~has):
        lam_all = _barycentric(m.points, m.triangles, xy[i][None, :])
        worst = lam_all.min(axis=1)
        j = int(np.argmax(worst))
        if worst[j] >= -tol:
            tri[i], bary[i], inside[i] = j, lam_all[j], True
            continue
        # outside: nearest triangle among the closest boundary candidates
        near = np.argsort(-worst)[:8]
        dists = [_point_triangle_distance(m.points[m.triangles[c]], xy[i]) for c in near]
        j = int(near[int(np.argmin(dists))])
        tri[i], bary[i] = j, lam_all[j]
    return tri, bary, inside


def interpolate(m: TriMesh, values, xy, *, boundary_hint=None, tol_factor: float = 1e-8):
    """Evaluate the P1 interpolant of vertex ``values`` at points ``xy``.

    Points outside ``m`` by more than ``tol_factor * diameter`` raise
    :class:`InterpolationError`, except those flagged in ``boundary_hint``,
    which may lie up to one boundary edge length outside (boundary snapping).
    """
    values = np.asarray(values)
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    tri, bary, inside = locate(m, xy)
    out_idx = np.flatnonzero(~inside)
    if out_idx.size:
        tol = tol_factor * m.diameter
        bnd_len = m.edge_lengths()[m.boundary_edges].max()
        for i in out_idx:
            d = _point_triangle_distance(m.points[m.triangles[tri[i]]], xy[i])
            limit = bnd_len if boundary_hint is not None and boundary_hint[i] else tol
            if d > limit:
                raise InterpolationError(
                    f"point ({xy[i, 0]:.6g}, {xy[i, 1]:.6g}) lies {d:.3e} outside the source mesh"
                )
    corner_vals = values[m.triangles[tri]]
    if corner_vals.ndim == 3:
        return np.einsum("ij,ijk->ik", bary, corner_vals)
    return np.einsum("ij,ij->i", bary, corner_vals)


def transfer_field(src_mesh: TriMesh, f, dst_mesh: TriMesh):
    """P1 interpolation of a :class:`~gpvortex.field.ComplexField` onto ``dst_mesh``.

    The result is not renormalized.
    """
    from .field import ComplexField

    if f.mesh is not src_mesh and not f.mesh.same_as(src_mesh):
        raise MeshError("field does not live on the source mesh")
    if dst_mesh.same_as(src_mesh):
        return ComplexField(dst_mesh, np.array(f.values, copy=True))
    vals = interpolate(src_mesh, f.values, dst_mesh.points, boundary_hint=dst_mesh.boundary)
    return ComplexField(dst_mesh, vals)


# -- radial mesh -------------------------------------------------------------------


@dataclass(frozen=True)
class RadialMesh1D:
    nodes: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or len(r) < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise MeshError("radial nodes must start at 0 and increase strictly")
        r.flags.writeable = False
        object.__setattr__(self, "nodes", r)

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1


def make_radial_mesh(r_max: float, n: int) -> RadialMesh1D:
    """Uniform nodes ``r_i = r_max * i / n``."""
    if not r_max > 0:
        raise ConfigError("radial mesh needs R_max > 0")
    if n < 16:
        raise ConfigError("radial mesh needs at least 16 elements")
    nodes = r_max * np.arange(n + 1) / n
    nodes[-1] = r_max
    return RadialMesh1D(nodes)


# -- serialization -------------------------------------------------------------------


def write_mesh(path, m: TriMesh) -> None:
    lines = [MESH_HEADER, str(m.n_vertices)]
    lines += [f"{x:.17g} {y:.17g} {int(b)}" for (x, y), b in zip(m.points, m.boundary)]
    lines.append(str(m.n_triangles))
    lines += [f"{i} {j} {k}" for i, j, k in m.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    """Read a mesh file; the ellipse axes are fitted to the boundary."""
    try:
        text = Path(path).read_text().split("\n")
    except OSError as exc:
        raise ConfigError(f"cannot read mesh file {path}: {exc}") from None
    if not text or text[0].strip() != MESH_HEADER:
        found = text[0].strip() if text else ""
        raise ConfigError(f"{path}: expected header '{MESH_HEADER}', found {found!r}")
    try:
        nv = int(text[1])
        vdata = np.loadtxt(text[2 : 2 + nv], ndmin=2)
        nt = int(text[2 + nv])
        tdata = np.loadtxt(text[3 + nv : 3 + nv + nt], dtype=np.int64, ndmin=2)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed mesh file ({exc})") from None
    if vdata.shape != (nv, 3) or tdata.shape != (nt, 3):
        raise ConfigError(f"{path}: vertex or triangle count does not match the data")
    m = TriMesh(vdata[:, :2], tdata, boundary=vdata[:, 2].astype(bool))
    try:
        axes = fit_ellipse_axes(m)
    except MeshError:
        axes = None
    return TriMesh(m.points, m.triangles, boundary=m.boundary, axes=axes)
