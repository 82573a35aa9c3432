import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpvortex.errors import ConfigError, InterpolationError, MeshError
from gpvortex.field import ComplexField, fe_data
from gpvortex.mesh import (
    TriMesh,
    audit_conformity,
    bisect_refine,
    interpolate,
    make_ellipse_mesh,
    make_radial_mesh,
    read_mesh,
    refine_uniform,
    transfer_field,
    write_mesh,
)
from gpvortex.params import from_coefficients
from gpvortex.tfinit import domain_radii, profile_for


@pytest.fixture(scope="module")
def disk():
    return make_ellipse_mesh(1.0, 1.0, 40)


def test_default_disk_mesh():
    m = make_ellipse_mesh(1.0, 1.0, 200, inflation=1.25)
    assert m.boundary.sum() == 200
    assert np.all(np.hypot(*m.points.T) <= 1.25 + 1e-12)
    assert np.all(m.areas > 0)
    assert m.area == pytest.approx(np.pi * 1.25**2, rel=1e-2)
    audit_conformity(m)


def test_ellipse_area_and_axes():
    m = make_ellipse_mesh(2.0, 0.5, 120)
    assert m.area == pytest.approx(np.pi, rel=1e-2)
    b = m.points[m.boundary]
    np.testing.assert_allclose((b[:, 0] / 2.0) ** 2 + (b[:, 1] / 0.5) ** 2, 1.0, atol=1e-12)


def test_coarse_mesh_euler():
    m = make_ellipse_mesh(1.0, 1.0, 8, inflation=1.0)
    assert m.n_vertices - len(m.edges) + m.n_triangles == 1
    audit_conformity(m)


@pytest.mark.parametrize("bad", [dict(r_x=0, r_y=1, nbseg=20), dict(r_x=1, r_y=1, nbseg=2)])
def test_ellipse_rejects_bad_input(bad):
    with pytest.raises((ConfigError, MeshError)):
        make_ellipse_mesh(**bad)


def test_refine_nothing_is_identity(disk):
    out = bisect_refine(disk, [])
    np.testing.assert_array_equal(out.points, disk.points)
    np.testing.assert_array_equal(out.triangles, disk.triangles)


def test_refine_all(disk):
    out = bisect_refine(disk, np.arange(disk.n_triangles))
    assert out.n_triangles > disk.n_triangles
    # every parent is split: no input triangle survives unchanged
    old = {tuple(sorted(t)) for t in disk.triangles}
    new = {tuple(sorted(t)) for t in out.triangles}
    assert not old & new
    audit_conformity(out)


def test_refine_single_interior(disk):
    interior = np.flatnonzero(~disk.boundary[disk.triangles].any(axis=1))
    out = bisect_refine(disk, [interior[0]])
    audit_conformity(out)
    # no boundary edge touched: area is preserved exactly
    assert out.area == pytest.approx(disk.area, abs=1e-12)


def test_refinement_keeps_old_vertices(disk):
    out = bisect_refine(disk, np.arange(0, disk.n_triangles, 3))
    np.testing.assert_array_equal(out.points[: disk.n_vertices], disk.points)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), rounds=st.integers(1, 6))
def test_random_refinement_conforming_and_shape_regular(seed, rounds):
    rng = np.random.default_rng(seed)
    m = make_ellipse_mesh(1.0, 0.8, 24)
    base = m.min_angles().min()
    for _ in range(rounds):
        k = max(1, int(0.2 * m.n_triangles))
        m = bisect_refine(m, rng.choice(m.n_triangles, size=k, replace=False))
        audit_conformity(m)
    assert m.min_angles().min() >= 0.5 * base


def test_conformity_audit_detects_hanging_node(disk):
    # split one triangle without its neighbour: hanging node
    t = disk.triangles[0]
    mid = 0.5 * (disk.points[t[0]] + disk.points[t[1]])
    pts = np.vstack([disk.points, mid])
    k = len(disk.points)
    tris = np.vstack([disk.triangles[1:], [[t[0], k, t[2]], [k, t[1], t[2]]]])
    with pytest.raises(MeshError):
        audit_conformity(TriMesh(pts, tris))


def test_transfer_identity(disk):
    rng = np.random.default_rng(3)
    f = ComplexField(disk, rng.normal(size=disk.n_vertices) + 1j * rng.normal(size=disk.n_vertices))
    g = transfer_field(disk, f, disk)
    np.testing.assert_array_equal(g.values, f.values)


def test_transfer_linear_exact(disk):
    fine = bisect_refine(refine_uniform(disk, 1), np.arange(0, 50))
    lin = lambda x, y: 0.3 + 1.7 * x - 2.2j * y + 0.5 * y  # noqa: E731
    f = ComplexField.from_function(disk, lin, dirichlet=False)
    g = transfer_field(disk, f, fine)
    exact = lin(fine.points[:, 0], fine.points[:, 1])
    inside = ~fine.boundary
    np.testing.assert_allclose(g.values[inside], exact[inside], atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(alpha=st.floats(-3, 3), beta=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_transfer_is_linear(alpha, beta, seed):
    src = make_ellipse_mesh(1.0, 1.0, 24)
    dst = refine_uniform(src, 1)
    rng = np.random.default_rng(seed)
    f = ComplexField(src, rng.normal(size=src.n_vertices) + 1j * rng.normal(size=src.n_vertices))
    g = ComplexField(src, rng.normal(size=src.n_vertices))
    lhs = transfer_field(src, f * alpha + g * beta, dst).values
    rhs = alpha * transfer_field(src, f, dst).values + beta * transfer_field(src, g, dst).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-13 * (1 + abs(alpha) + abs(beta)))


def test_transfer_smooth_field_second_order():
    p = from_coefficients("Classical", 500, 0.0, 1.0, 1.0)
    prof = profile_for(p)
    coarse = make_ellipse_mesh(*domain_radii(prof, 1.25), 60)
    smooth = lambda x, y: np.exp(-(x * x + y * y) / prof.rho0)  # noqa: E731  smooth stand-in of the profile scale
    errs = []
    m = coarse
    for _ in range(3):
        fine = refine_uniform(m, 2)  # two bisection rounds halve h
        f = ComplexField.from_function(m, smooth, dirichlet=False)
        g = transfer_field(m, f, fine).values - smooth(*fine.points.T)
        mass = fe_data(fine).mass
        errs.append(np.sqrt(np.real(np.vdot(g, mass @ g))))
        m = fine
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7)


def test_interpolation_rejects_far_points(disk):
    with pytest.raises(InterpolationError):
        interpolate(disk, np.zeros(disk.n_vertices), [[3.0, 0.0]])


def test_radial_mesh():
    rm = make_radial_mesh(1.0, 16)
    assert len(rm.nodes) == 17
    np.testing.assert_allclose(np.diff(rm.nodes), 1 / 16)
    big = make_radial_mesh(5.25, 1000)
    assert big.nodes[-1] == 5.25
    assert np.all(np.diff(big.nodes) > 0)
    with pytest.raises(ConfigError):
        make_radial_mesh(1.0, 8)


def test_mesh_roundtrip(tmp_path, disk):
    m = bisect_refine(disk, [0, 5, 9])
    path = tmp_path / "m.mesh"
    write_mesh(path, m)
    back = read_mesh(path)
    np.testing.assert_array_equal(back.points, m.points)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.boundary, m.boundary)


def test_mesh_bad_header(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("NOT-A-MESH\n3\n")
    with pytest.raises(ConfigError, match="NOT-A-MESH"):
        read_mesh(path)
