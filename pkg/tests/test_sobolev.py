import numpy as np
import pytest
import scipy.sparse.linalg as spla

from gpvortex.energy import EnergyModel
from gpvortex.field import ComplexField, l2_inner, l2_norm, normalize
from gpvortex.mesh import make_ellipse_mesh, refine_uniform
from gpvortex.params import from_coefficients
from gpvortex.sobolev import (
    DescentOptions,
    DescentState,
    HAOperator,
    Ladder,
    LadderAction,
    cubic_linesearch,
    cubic_real_roots,
    descend,
    ha_riesz_solve,
    ladder_check,
    project_tangent,
    relative_change,
)


@pytest.fixture(scope="module")
def mesh():
    return refine_uniform(make_ellipse_mesh(4.0, 4.0, 48), 1)


def seed_field(m, rng, vortex=True):
    x, y = m.points.T
    base = np.exp(-(x * x + y * y) / 3) * (1 + 0.2 * rng.normal(size=m.n_vertices))
    if vortex:
        base = base * (x - 0.5 + 1j * y)
    base = base.astype(complex)
    base[m.boundary] = 0
    return normalize(ComplexField(m, base))


def dirichlet_random(m, rng):
    v = rng.normal(size=m.n_vertices) + 1j * rng.normal(size=m.n_vertices)
    v[m.boundary] = 0
    return ComplexField(m, v)


def test_riesz_representation(mesh):
    # <G, v>_A equals dE(u)[v] / (2 eps) for arbitrary Dirichlet v
    p = from_coefficients("Classical", 500, 0.8, 1, 1, a_4=0.3)
    rng = np.random.default_rng(0)
    u = seed_field(mesh, rng)
    op = HAOperator(mesh, p)
    model = EnergyModel(mesh, p)
    g = ha_riesz_solve(u, p, op, model)
    load = model.gradient(u) / (2 * p.epsilon)
    for _ in range(5):
        v = dirichlet_random(mesh, rng)
        lhs = op.inner(g, v)
        rhs = float(load.real @ v.real + load.imag @ v.imag)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_no_rotation_reduces_to_h1(mesh):
    from gpvortex.field import fe_data

    p = from_coefficients("Classical", 500, 0.0, 1, 1)
    op = HAOperator(mesh, p)
    fe = fe_data(mesh)
    rng = np.random.default_rng(1)
    u, v = dirichlet_random(mesh, rng), dirichlet_random(mesh, rng)
    h1 = fe.mass + fe.stiffness
    expect = float(u.real @ (h1 @ v.real) + u.imag @ (h1 @ v.imag))
    assert op.inner(u, v) == pytest.approx(expect, rel=1e-12)


def test_ha_symmetric_positive_definite(mesh):
    p = from_coefficients("AR", 500, 1.5, 1, 1)
    op = HAOperator(mesh, p)
    a = op.matrix
    assert spla.norm(a - a.T) <= 1e-12 * spla.norm(a)
    lam = spla.eigsh(a, k=1, sigma=0, which="LM", return_eigenvectors=False)
    assert lam[0] > 0


def test_projection_orthogonal_and_idempotent(mesh):
    p = from_coefficients("Classical", 500, 0.4, 1, 1)
    rng = np.random.default_rng(2)
    u = seed_field(mesh, rng)
    op = HAOperator(mesh, p)
    g = ha_riesz_solve(u, p, op)
    pg = project_tangent(u, g, p, op)
    assert abs(l2_inner(pg, u).real) < 1e-12 * l2_norm(g)
    ppg = project_tangent(u, pg, p, op)
    np.testing.assert_allclose(ppg.values, pg.values, atol=1e-12 * np.abs(pg.values).max())


@pytest.mark.parametrize("coef", [(1, -6, 11, -6), (2, 0, 0, -16), (1, 0, 1, 0), (0, 1, -3, 2), (0, 0, 2, -1),
                                  (1, -3, 3, -1)])
def test_cubic_roots(coef):
    roots = cubic_real_roots(*coef)
    ref = np.roots(coef if coef[0] else coef[1:] if coef[1] else coef[2:])
    ref = np.sort(ref[np.abs(ref.imag) < 1e-6].real)
    assert np.all(np.abs(np.polyval(coef, roots)) < 1e-9)
    for r in np.unique(np.round(ref, 6)):
        assert np.min(np.abs(roots - r)) < 1e-5


def test_line_polynomial_is_exact(mesh):
    p = from_coefficients("Classical", 500, 0.6, 1, 1, a_4=0.2)
    rng = np.random.default_rng(3)
    u = seed_field(mesh, rng)
    pg = dirichlet_random(mesh, rng) * 0.01
    model = EnergyModel(mesh, p)
    poly = model.line_polynomial(u, pg)
    for chi in (0.0, 0.3, 1.7, -2.0):
        direct = model.total(ComplexField(mesh, u.values - chi * pg.values))
        assert np.polyval(poly, chi) == pytest.approx(direct, rel=1e-11)


def test_linesearch_matches_grid_oracle(mesh):
    rng = np.random.default_rng(4)
    for k in range(10):
        p = from_coefficients("Classical", 100 + 400 * rng.random(), 1.5 * rng.random(), 1, 1,
                              a_4=0.3 * rng.random())
        u = seed_field(mesh, rng)
        op = HAOperator(mesh, p)
        model = EnergyModel(mesh, p)
        pg = project_tangent(u, ha_riesz_solve(u, p, op, model), p, op)
        ls = cubic_linesearch(u, pg, p, model)
        assert not ls.fallback
        grid = np.linspace(0, 4 * ls.chi, 10_000)
        jg = np.polyval(ls.coefficients, grid)
        assert ls.energy <= jg.min() + 1e-12 * abs(jg.min())
        # stationary: J'(chi) vanishes relative to the slope at zero
        dpoly = np.polyder(ls.coefficients)
        assert abs(np.polyval(dpoly, ls.chi)) <= 1e-8 * abs(np.polyval(dpoly, 0.0))


def test_quadratic_energy_step_closed_form(mesh):
    # C_g = 0: J is quadratic, chi = -J'(0) / J''(0)
    p = from_coefficients("Classical", 0.0, 0.5, 1, 1)
    u = seed_field(mesh, np.random.default_rng(5))
    op = HAOperator(mesh, p)
    model = EnergyModel(mesh, p)
    pg = project_tangent(u, ha_riesz_solve(u, p, op, model), p, op)
    ls = cubic_linesearch(u, pg, p, model)
    c = ls.coefficients
    assert abs(c[0]) < 1e-14 * abs(c[2])
    assert ls.chi == pytest.approx(-c[3] / (2 * c[2]), rel=1e-10)


def test_ladder_defaults():
    lad = Ladder()
    assert lad.thresholds[0] == 1e-2 and lad.thresholds[-1] == 1e-9
    np.testing.assert_allclose(lad.thresholds[1:-1] / lad.thresholds[:-2], 0.5)


def test_ladder_constant_above_top():
    lad = Ladder()
    assert all(ladder_check(0.05, lad) is LadderAction.NONE for _ in range(5))


def test_ladder_adapt_then_advance():
    lad = Ladder()
    assert lad.check(0.05) is LadderAction.NONE
    assert lad.check(0.008) is LadderAction.ADAPT
    assert lad.check(0.007) is LadderAction.ADAPT
    assert lad.check(0.006) is LadderAction.ADVANCE
    assert lad.level == 1


def test_ladder_relax_and_below_lower():
    lad = Ladder()
    lad.check(0.05)
    lad.check(0.001)  # below the next threshold: advance
    assert lad.level == 1
    assert lad.check(0.02) is LadderAction.RELAX
    assert lad.level == 0


def test_relative_change_guard():
    assert relative_change(2.0, 4.0) == (-1.0, False)
    d, guarded = relative_change(0.0, 1e-3)
    assert guarded and d == -1e-3


def test_descent_oscillator_energy():
    p = from_coefficients("Classical", 0.0, 0.0, 1, 1)
    m = make_ellipse_mesh(5.0, 5.0, 200)
    x, y = m.points.T
    u = normalize(ComplexField(m, np.exp(-(x * x + y * y) / 4) * (1 + 0.1 * x) * (~m.boundary)))
    st = descend(DescentState(u), p, DescentOptions(eps_c=1e-10, adapt=False, max_iter=500))
    assert st.converged
    assert st.energies[-1] == pytest.approx(1.0, rel=0.02)


def test_descent_monotone_and_normalized(mesh):
    p = from_coefficients("Classical", 500, 0.4, 1, 1)
    u = seed_field(mesh, np.random.default_rng(6))
    norms = []
    st = descend(DescentState(u), p, DescentOptions(max_iter=60, adapt=False),
                 on_iter=lambda s: norms.append(l2_norm(s.u)))
    e = np.array(st.energies)
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[1:]))
    assert np.all(np.abs(np.array(norms) - 1) <= 1e-8)
    assert [r.event for r in st.trace.rows].count("adapt") == 0


def test_forced_adaptation_period(mesh):
    p = from_coefficients("Classical", 500, 0.4, 1, 1)
    u = seed_field(mesh, np.random.default_rng(7))
    opts = DescentOptions(max_iter=25, iter_adapt=10, err_adapt=0.05, ladder=Ladder(eps1=1e-30 * 2, eps_c=1e-30))
    st = descend(DescentState(u), p, opts)
    assert st.adaptations >= 1
    assert abs(l2_norm(st.u) - 1) < 1e-10
