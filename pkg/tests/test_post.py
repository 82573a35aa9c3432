import numpy as np
import pytest

from gpvortex.errors import MeshError
from gpvortex.field import ComplexField, normalize
from gpvortex.mesh import TriMesh, make_ellipse_mesh
from gpvortex.post import (
    VTK_HEADER,
    SolverTrace,
    VortexReport,
    boundary_loop,
    contour_winding,
    detect_vortices,
    read_trace,
    read_vtk_scalars,
    triangle_windings,
    write_trace,
    write_vtk,
)
from gpvortex.seeding import VortexArraySpec, VortexSpec, imprint_array, imprint_vortex


@pytest.fixture(scope="module")
def mesh():
    return make_ellipse_mesh(4.0, 4.0, 160)


def smooth(m, zero_boundary=False):
    x, y = m.points.T
    vals = np.exp(-(x * x + y * y) / 12).astype(complex)
    if zero_boundary:
        vals[m.boundary] = 0
    return normalize(ComplexField(m, vals))


def test_real_field_has_no_vortex(mesh):
    rep = detect_vortices(smooth(mesh))
    assert rep.count == 0 and rep.vortices == []
    np.testing.assert_array_equal(triangle_windings(smooth(mesh)), 0.0)


def test_single_seeded_vortex(mesh):
    u = imprint_vortex(smooth(mesh), VortexSpec((0.5, 0.0), 0.3))
    rep = detect_vortices(u)
    assert rep.count == 1
    v = rep.vortices[0]
    assert v.winding == 1
    assert np.hypot(v.x - 0.5, v.y) < mesh.edge_lengths().max()
    assert v.core_density < rep.rho_min


def test_eleven_ring(mesh):
    u = imprint_array(smooth(mesh), VortexArraySpec(1, 11, 2.0), 0.15)
    rep = detect_vortices(u)
    assert rep.count == 11
    assert {v.winding for v in rep.vortices} == {1}
    radii = np.array([np.hypot(v.x, v.y) for v in rep.vortices])
    np.testing.assert_allclose(radii, 2.0, atol=mesh.edge_lengths().max())


def test_windings_are_integers(mesh):
    u = imprint_array(smooth(mesh, zero_boundary=True), VortexArraySpec(2, 5, 1.0, dr=1.0), 0.2)
    w = triangle_windings(u)
    np.testing.assert_allclose(w, np.rint(w), atol=1e-9)


@pytest.mark.parametrize("gamma", [0.3, 2.0, -2.9])
def test_global_phase_invariance(mesh, gamma):
    u = imprint_array(smooth(mesh), VortexArraySpec(1, 4, 1.5), 0.2)
    a = detect_vortices(u)
    b = detect_vortices(u * np.exp(1j * gamma))
    assert a.count == b.count
    for va, vb in zip(a.vortices, b.vortices):
        assert va.winding == vb.winding
        assert np.hypot(va.x - vb.x, va.y - vb.y) < 1e-9


def test_index_theorem(mesh):
    # total detected winding equals the boundary-contour winding
    rng = np.random.default_rng(0)
    u = smooth(mesh)
    centers = [(1.0, 0.5, 1), (-1.2, 0.3, -1), (0.2, -1.4, 2)]
    for x, y, w in centers:
        u = imprint_vortex(u, VortexSpec((x, y), 0.25, winding=w))
    u = u * np.exp(1j * rng.random())
    loop = boundary_loop(mesh)
    assert contour_winding(u.values[loop]) == pytest.approx(2.0, abs=1e-9)
    rep = detect_vortices(u, ghost_filter=False)
    assert rep.total_winding == 2
    assert rep.count == 3


def test_boundary_loop_is_ccw(mesh):
    loop = boundary_loop(mesh)
    assert len(loop) == mesh.boundary.sum()
    x, y = mesh.points[loop].T
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_report_json(tmp_path, mesh):
    import json

    rep = detect_vortices(imprint_vortex(smooth(mesh), VortexSpec((0.5, 0.0), 0.3)))
    rep.write_json(tmp_path / "v.json")
    data = json.loads((tmp_path / "v.json").read_text())
    assert data["count"] == 1 and data["vortices"][0]["winding"] == 1
    assert VortexReport([], 0.2).as_dict()["count"] == 0


def test_vtk_roundtrip(tmp_path, mesh):
    u = imprint_vortex(smooth(mesh), VortexSpec((0.5, 0.0), 0.3))
    path = tmp_path / "u.vtk"
    write_vtk(u, path)
    lines = path.read_text().splitlines()
    assert lines[0] == VTK_HEADER == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    data = read_vtk_scalars(path)
    np.testing.assert_allclose(data["density"], np.abs(u.values) ** 2, rtol=0, atol=1e-15)
    np.testing.assert_allclose(data["phase"], np.angle(u.values), rtol=0, atol=1e-15)
    n_types = lines.index(f"CELL_TYPES {mesh.n_triangles}")
    assert set(lines[n_types + 1 : n_types + 1 + mesh.n_triangles]) == {"5"}


def test_vtk_refuses_empty_mesh(tmp_path):
    empty = TriMesh(np.zeros((3, 2)) + np.eye(3)[:, :2], np.zeros((0, 3), dtype=np.int64))
    with pytest.raises(MeshError):
        write_vtk(ComplexField(empty, np.zeros(3)), tmp_path / "e.vtk")


def test_trace_empty_and_roundtrip(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(SolverTrace(), path)
    assert path.read_text().strip() == "iter,energy,dE,Lz,norm,nv,event"
    assert (tmp_path / "plot.gp").exists()
    tr = SolverTrace()
    tr.add(iter=0, energy=8.5, dE=0.0, Lz=0.1, norm=1.0, nv=100, event="step")
    tr.add(iter=1, energy=8.4, dE=-0.1 / 8.4, Lz=0.3, norm=1.0 - 1e-12, nv=100, event="renorm")
    tr.add(iter=2, energy=8.41, dE=0.0, Lz=0.31, norm=1.0, nv=150, event="adapt")
    write_trace(tr, path, plot_script=False)
    back = read_trace(path)
    assert back.rows == tr.rows


def test_trace_invariants():
    tr = SolverTrace()
    tr.add(iter=3, energy=1.0, dE=0.0, Lz=0.0, norm=1.0, nv=1, event="step")
    with pytest.raises(ValueError):
        tr.add(iter=3, energy=1.0, dE=0.0, Lz=0.0, norm=1.0, nv=1, event="step")
    with pytest.raises(ValueError):
        tr.add(iter=4, energy=1.0, dE=0.0, Lz=0.0, norm=1.0, nv=1, event="plot")
    assert tr.next_iter == 4
