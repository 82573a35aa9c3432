import numpy as np
import pytest

from gpvortex.adapt import (
    BudgetError,
    ErrorIndicator,
    adapt_mesh,
    dorfler_set,
    hessian_indicator,
    mark,
)
from gpvortex.errors import ConfigError, NumericError
from gpvortex.field import ComplexField, l2_norm, normalize
from gpvortex.mesh import make_ellipse_mesh, refine_uniform
from gpvortex.seeding import VortexSpec, imprint_vortex

CORE = 0.3


@pytest.fixture(scope="module")
def mesh():
    return make_ellipse_mesh(3.0, 3.0, 80)


def gaussian(m):
    x, y = m.points.T
    vals = np.exp(-(x * x + y * y) / 2).astype(complex)
    vals[m.boundary] = 0
    return normalize(ComplexField(m, vals))


@pytest.fixture(scope="module")
def vortex_field(mesh):
    return imprint_vortex(gaussian(mesh), VortexSpec((0.8, -0.4), CORE))


def test_linear_density_scores_vanish(mesh):
    x, y = mesh.points.T
    u = ComplexField(mesh, np.sqrt(2.0 + 0.2 * x + 0.1 * y) * np.exp(0.3j))
    ref = hessian_indicator(gaussian(mesh)).scores.max()
    assert hessian_indicator(u).scores.max() <= 1e-10 * ref


def test_vortex_is_score_maximum(vortex_field):
    ind = hessian_indicator(vortex_field)
    m = vortex_field.mesh
    c = m.points[m.triangles[int(np.argmax(ind.scores))]].mean(axis=0)
    assert np.hypot(c[0] - 0.8, c[1] + 0.4) < 2 * CORE


def test_uniform_refinement_quarters_scores(mesh):
    # the first bisection pair does not yet halve the initial diameters; later pairs do
    coarse, fine = refine_uniform(mesh, 2), refine_uniform(mesh, 4)
    assert fine.triangle_diameters().max() == pytest.approx(0.5 * coarse.triangle_diameters().max(), rel=0.05)
    s0 = hessian_indicator(gaussian(coarse)).scores
    s1 = hessian_indicator(gaussian(fine)).scores
    ratio = s0.max() / s1.max()
    assert 3.0 <= ratio <= 5.0


def test_infinite_target_is_noop(mesh, vortex_field):
    m2, u2 = adapt_mesh(mesh, vortex_field, np.inf, h_max=10.0)
    assert m2 is mesh
    np.testing.assert_array_equal(u2.values, vortex_field.values)


def test_vortex_adaptation_refines_core(mesh, vortex_field):
    m2, u2 = adapt_mesh(mesh, vortex_field, 1e-4)
    assert m2.n_vertices > mesh.n_vertices
    assert l2_norm(u2) == pytest.approx(1.0, abs=1e-14)

    def core_min_edge(m):
        e = m.edges
        mid = 0.5 * (m.points[e[:, 0]] + m.points[e[:, 1]])
        near = np.hypot(mid[:, 0] - 0.8, mid[:, 1] + 0.4) < 2 * CORE
        return m.edge_lengths()[near].min()

    assert core_min_edge(m2) < core_min_edge(mesh)
    # bisection only: old vertices and their values survive
    np.testing.assert_array_equal(m2.points[: mesh.n_vertices], mesh.points)
    # up to the single renormalization constant
    old = u2.values[: mesh.n_vertices]
    k = int(np.argmax(np.abs(vortex_field.values)))
    np.testing.assert_allclose(old, vortex_field.values * (old[k] / vortex_field.values[k]), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_repeated_adaptation_terminates(mesh, vortex_field, eps):
    m, u = mesh, vortex_field
    for rounds in range(1, 21):
        m2, u = adapt_mesh(m, u, eps)
        if m2 is m:
            break
        m = m2
    else:
        pytest.fail("adaptation did not settle within 20 rounds")
    assert rounds <= 20


def test_budget_error(mesh, vortex_field):
    with pytest.raises(BudgetError):
        adapt_mesh(mesh, vortex_field, 1e-8, budget=mesh.n_vertices + 1)


def test_marking_rules():
    s = np.array([5.0, 3.0, 1.0, 1.0])
    np.testing.assert_array_equal(dorfler_set(s, 0.5), [0])
    np.testing.assert_array_equal(dorfler_set(s, 0.8), [0, 1])
    ind = ErrorIndicator(s, np.array([0.5, 0.5, 2.0, 1e-4]), eps_target=2.0, h_min=1e-3, h_max=1.0)
    np.testing.assert_array_equal(mark(ind), [0, 2])
    # nothing below h_min is marked, even when oversized-by-score
    ind2 = ErrorIndicator(s, np.array([1e-4, 0.5, 0.5, 0.5]), eps_target=0.0)
    assert 0 not in mark(ind2)


def test_indicator_invariants():
    with pytest.raises(NumericError):
        ErrorIndicator(np.array([-1.0]), np.array([1.0]))
    with pytest.raises(ConfigError):
        ErrorIndicator(np.array([1.0]), np.array([1.0]), h_min=1.0, h_max=0.5)
