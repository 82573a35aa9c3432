"""Vortex detection, solver traces and output writers."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import GPVortexError, MeshError
from .field import ComplexField

TRACE_FIELDS = ("iter", "energy", "dE", "Lz", "norm", "nv", "event")
TRACE_EVENTS = ("step", "adapt", "renorm")
VTK_HEADER = "# vtk DataFile Version 3.0"


class OutputError(GPVortexError, OSError):
    pass


# -- vortex detection ------------------------------------------------------------------


@dataclass(frozen=True)
class Vortex:
    x: float
    y: float
    winding: int
    core_density: float


@dataclass
class VortexReport:
    vortices: list
    rho_min: float

    @property
    def count(self) -> int:
        return len(self.vortices)

    @property
    def total_winding(self) -> int:
        return int(sum(v.winding for v in self.vortices))

    def positions(self) -> np.ndarray:
        return np.array([[v.x, v.y] for v in self.vortices]).reshape(-1, 2)

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "rho_min": self.rho_min,
            "vortices": [{"x": v.x, "y": v.y, "winding": v.winding, "core_density": v.core_density}
                         for v in self.vortices],
        }

    def write_json(self, path) -> None:
        _write_text(path, json.dumps(self.as_dict(), indent=2) + "\n")


def triangle_windings(u: ComplexField) -> np.ndarray:
    """Phase circulation around each triangle in units of 2 pi (edge jumps wrapped to (-pi, pi])."""
    return kernels.triangle_winding(u.mesh.triangles, u.real, u.imag)


def _p1_zero(pts, vals):
    """Point where the linear interpolant of three complex values vanishes,
    clipped to the triangle."""
    a = np.array([vals.real, vals.imag, np.ones(3)])
    try:
        lam = np.linalg.solve(a, [0.0, 0.0, 1.0])
    except np.linalg.LinAlgError:
        lam = np.full(3, 1.0 / 3.0)
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum() if lam.sum() > 0 else np.full(3, 1.0 / 3.0)
    return lam @ pts


def _outer_low_density(m, rho, level):
    """Vertices whose low-density region (``rho < level``) reaches the boundary."""
    low = rho < level
    e = m.edges
    keep = low[e[:, 0]] & low[e[:, 1]]
    g = sp.coo_matrix((np.ones(keep.sum()), (e[keep, 0], e[keep, 1])), shape=(m.n_vertices,) * 2)
    _, labels = connected_components(g, directed=False)
    outer_labels = np.unique(labels[m.boundary & low])
    return low & np.isin(labels, outer_labels)


def detect_vortices(u: ComplexField, rho_min: float = 0.2, ghost_filter: bool = True) -> VortexReport:
    """Phase-winding vortex detector.

    Triangles with circulation of magnitude at least one half carry a winding.
    Carriers sharing a vertex merge into one vortex located at the zero of the
    linear interpolant in its lowest-density triangle.  Vortices whose core
    density exceeds ``rho_min`` times the peak density are dropped, as are
    (with ``ghost_filter``) phase defects in the dilute region connected to
    the domain boundary, where the phase carries no physical meaning.
    """
    m = u.mesh
    rho = np.abs(u.values) ** 2
    peak = float(rho.max()) if rho.size else 0.0
    if peak == 0.0:
        return VortexReport([], rho_min)
    w = triangle_windings(u)
    carriers = np.flatnonzero(np.abs(w) >= 0.5)
    if carriers.size == 0:
        return VortexReport([], rho_min)
    wind = np.rint(w[carriers]).astype(int)
    # merge carriers sharing a vertex: bipartite carrier/vertex graph
    nc = len(carriers)
    rows = np.repeat(np.arange(nc), 3)
    cols = nc + m.triangles[carriers].ravel()
    g = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(nc + m.n_vertices,) * 2)
    _, labels = connected_components(g, directed=False)
    _, labels = np.unique(labels[:nc], return_inverse=True)
    ncomp = int(labels.max()) + 1
    tri_min_rho = rho[m.triangles].min(axis=1)
    tri_mean_rho = rho[m.triangles].mean(axis=1)
    outer = _outer_low_density(m, rho, rho_min * peak) if ghost_filter else None
    found = []
    for c in range(ncomp):
        members = carriers[labels == c]
        total = int(wind[labels == c].sum())
        if total == 0:
            continue
        core = float(tri_min_rho[members].min())
        if core >= rho_min * peak:
            continue
        if outer is not None and outer[m.triangles[members]].any():
            continue
        t = members[np.argmin(tri_mean_rho[members])]
        xy = _p1_zero(m.points[m.triangles[t]], u.values[m.triangles[t]])
        found.append(Vortex(float(xy[0]), float(xy[1]), total, core / peak))
    found.sort(key=lambda v: (round(np.hypot(v.x, v.y), 9), np.arctan2(v.y, v.x)))
    return VortexReport(found, rho_min)


def boundary_loop(m) -> np.ndarray:
    """Boundary vertices in counterclockwise order."""
    t = m.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    bnd = m.edges[m.boundary_edges]
    bset = {tuple(e) for e in bnd}
    nxt = {}
    for (i, j), k in zip(directed, map(tuple, key)):
        if k in bset:
            nxt[int(i)] = int(j)
    start = min(nxt)
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise MeshError("boundary is not a single closed loop")
    return np.array(loop)


def contour_winding(values: np.ndarray) -> float:
    """Winding number of a closed sequence of complex values."""
    d = np.angle(np.roll(values, -1) * np.conj(values))
    return float(d.sum() / (2.0 * np.pi))


# -- traces -----------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    iter: int
    energy: float
    dE: float
    Lz: float
    norm: float
    nv: int
    event: str

    def __post_init__(self):
        if self.event not in TRACE_EVENTS:
            raise ValueError(f"unknown trace event {self.event!r}")


@dataclass
class SolverTrace:
    rows: list = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.iter <= self.rows[-1].iter:
            raise ValueError("trace iterations must increase strictly")
        self.rows.append(row)

    def add(self, **kw) -> None:
        self.append(TraceRow(**kw))

    def __len__(self):
        return len(self.rows)

    @property
    def next_iter(self) -> int:
        return self.rows[-1].iter + 1 if self.rows else 0

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


_PLOT_GP = """# gnuplot script for {csv}
set datafile separator ','
set key autotitle columnhead
set multiplot layout 2,2
set title 'energy'
plot '{csv}' using 1:2 with lines
set title 'relative energy change'
set logscale y
plot '{csv}' using 1:(abs($3)) with lines
unset logscale y
set title 'angular momentum'
plot '{csv}' using 1:4 with lines
set title 'L2 norm'
plot '{csv}' using 1:5 with lines
unset multiplot
pause -1
"""


def _write_text(path, text) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def write_trace(trace: SolverTrace, path, plot_script: bool = True) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_FIELDS)
            for r in trace.rows:
                w.writerow([r.iter, repr(r.energy), repr(r.dE), repr(r.Lz), repr(r.norm), r.nv, r.event])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    if plot_script:
        _write_text(path.parent / "plot.gp", _PLOT_GP.format(csv=path.name))


def read_trace(path) -> SolverTrace:
    trace = SolverTrace()
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            trace.append(
                TraceRow(int(rec["iter"]), float(rec["energy"]), float(rec["dE"]), float(rec["Lz"]),
                         float(rec["norm"]), int(rec["nv"]), rec["event"])
            )
    return trace


# -- VTK ------------------------------------------------------------------------------


def write_vtk(u: ComplexField, path, title: str = "gpvortex solution") -> None:
    """Legacy ASCII unstructured grid with point scalars ``density`` and ``phase``."""
    m = u.mesh
    if m.n_triangles == 0:
        raise MeshError("refusing to write a mesh without triangles")
    lines = [VTK_HEADER, title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {m.n_vertices} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in m.points]
    lines.append(f"CELLS {m.n_triangles} {4 * m.n_triangles}")
    lines += [f"3 {i} {j} {k}" for i, j, k in m.triangles]
    lines.append(f"CELL_TYPES {m.n_triangles}")
    lines += ["5"] * m.n_triangles
    lines.append(f"POINT_DATA {m.n_vertices}")
    for name, data in (("density", np.abs(u.values) ** 2), ("phase", np.angle(u.values))):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in data]
    _write_text(path, "\n".join(lines) + "\n")


def read_vtk_scalars(path) -> dict:
    """Point scalars of a file written by :func:`write_vtk`."""
    text = Path(path).read_text().split("\n")
    out = {}
    n = None
    i = 0
    while i < len(text):
        line = text[i]
        if line.startswith("POINT_DATA"):
            n = int(line.split()[1])
        elif line.startswith("SCALARS") and n is not None:
            name = line.split()[1]
            out[name] = np.array([float(v) for v in text[i + 2 : i + 2 + n]])
            i += 1 + n
        i += 1
    return out


def write_echo(path, summary: dict) -> None:
    _write_text(path, json.dumps(summary, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
