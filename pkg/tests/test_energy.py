import numpy as np
import pytest
import scipy.linalg as sla

from gpvortex.energy import (
    EnergyModel,
    angular_momentum,
    chemical_potential,
    energy,
    energy_covariant,
    gradient_l2,
)
from gpvortex.field import ComplexField, fe_data, normalize
from gpvortex.mesh import make_ellipse_mesh, refine_uniform
from gpvortex.params import from_coefficients


@pytest.fixture(scope="module")
def mesh():
    return refine_uniform(make_ellipse_mesh(3.0, 3.0, 40), 1)


def random_field(m, rng, smooth=True):
    x, y = m.points.T
    if smooth:
        c = rng.normal(size=6) + 1j * rng.normal(size=6)
        vals = (c[0] + c[1] * x + c[2] * y + c[3] * x * y) * np.exp(-(x * x + y * y) * (0.3 + rng.random()))
        vals = vals + 0.1 * (rng.normal(size=m.n_vertices) + 1j * rng.normal(size=m.n_vertices))
    else:
        vals = rng.normal(size=m.n_vertices) + 1j * rng.normal(size=m.n_vertices)
    vals[m.boundary] = 0.0
    return ComplexField(m, vals)


def test_zero_field(mesh):
    p = from_coefficients("Classical", 500, 0.4, 1, 1)
    e = energy(ComplexField(mesh, np.zeros(mesh.n_vertices)), p)
    assert all(v == 0 for v in e.as_dict().values())
    assert energy_covariant(ComplexField(mesh, np.zeros(mesh.n_vertices)), p) == 0.0
    np.testing.assert_array_equal(gradient_l2(ComplexField(mesh, np.zeros(mesh.n_vertices)), p), 0.0)


def test_real_field_no_rotation_energy(mesh):
    p = from_coefficients("Classical", 500, 1.5, 1, 1)
    u = ComplexField(mesh, random_field(mesh, np.random.default_rng(0)).real)
    e = energy(u, p)
    assert abs(e.angular_momentum) < 1e-12
    assert abs(e.rotation) < 1e-12


@pytest.mark.parametrize("scaling", ["Classical", "AR"])
def test_energy_forms_agree(mesh, scaling):
    rng = np.random.default_rng(11)
    for k in range(50):
        ratio = 2.0 * rng.random()
        p = from_coefficients(scaling, 500.0, ratio, 1.0, 1.0, a_4=0.5 * rng.random())
        u = random_field(mesh, rng)
        e1 = energy(u, p).total
        e2 = energy_covariant(u, p)
        assert abs(e1 - e2) <= 1e-10 * (1 + abs(e1)), (k, e1, e2)


def test_no_rotation_pointwise_identity(mesh):
    # with C_Omega = 0 the covariant form only swaps trap quadrature degree
    p = from_coefficients("Classical", 50.0, 0.0, 1.2, 0.8)
    u = random_field(mesh, np.random.default_rng(4))
    assert energy_covariant(u, p) == pytest.approx(energy(u, p).total, rel=1e-13)


def test_gradient_finite_differences(mesh):
    rng = np.random.default_rng(5)
    p = from_coefficients("Classical", 500.0, 0.7, 1.0, 1.0, a_4=0.3)
    model = EnergyModel(mesh, p)
    h = 1e-5
    for _ in range(20):
        u = normalize(random_field(mesh, rng))
        v = random_field(mesh, rng, smooth=False)
        g = model.gradient(u)
        ana = float(g.real @ v.real + g.imag @ v.imag)
        fd = (model.total(u + v * h) - model.total(u - v * h)) / (2 * h)
        assert ana == pytest.approx(fd, rel=1e-6)


def _oscillator(m):
    p = from_coefficients("Classical", 0.0, 0.0, 1.0, 1.0)
    model = EnergyModel(m, p)
    free = fe_data(m).interior
    a = (0.5 * model.K + model.MV)[free][:, free].toarray()
    b = model.M[free][:, free].toarray()
    w, vec = sla.eigh(a, b, subset_by_index=[0, 0])
    vals = np.zeros(m.n_vertices)
    vals[free] = vec[:, 0]
    return p, model, normalize(ComplexField(m, vals)), w[0]


def test_linear_ground_state_energy_converges():
    m = make_ellipse_mesh(5.0, 5.0, 40)
    errs = []
    for _ in range(3):
        p, model, u, lam = _oscillator(m)
        e = model.total(u)
        assert e == pytest.approx(lam, rel=1e-10)
        errs.append(abs(e - 1.0))
        m = refine_uniform(m, 2)
    # second order in h: each halving cuts the error by about four
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3
    assert errs[-1] < 3e-3


def test_chemical_potential_identities():
    m = make_ellipse_mesh(5.0, 5.0, 40)
    p, model, u, lam = _oscillator(m)
    assert chemical_potential(u, p) == pytest.approx(model.total(u), rel=1e-10)
    q = from_coefficients("Classical", 500.0, 0.0, 1.0, 1.0)
    x, y = m.points.T
    tf = np.sqrt(np.maximum(1.0 - (x * x + y * y) / 17.0, 0.0))
    v = normalize(ComplexField(m, tf))
    assert chemical_potential(v, q) > energy(v, q).total


def test_angular_momentum_winding_one():
    m = refine_uniform(make_ellipse_mesh(1.0, 1.0, 48), 8)  # four halvings of h
    x, y = m.points.T
    r = np.hypot(x, y)
    u = normalize(ComplexField(m, r * np.exp(-4 * r * r) * np.exp(1j * np.arctan2(y, x))))
    assert abs(angular_momentum(u) - 1.0) < 0.02


def test_angular_momentum_real_field(mesh):
    u = ComplexField(mesh, random_field(mesh, np.random.default_rng(9)).real)
    assert abs(angular_momentum(u)) < 1e-12


def test_lz_is_real(mesh):
    # the imaginary part of conj(u) L u integrates to zero: check via the Hermitian form
    fe = fe_data(mesh)
    u = random_field(mesh, np.random.default_rng(2))
    s = fe.rotation_skew
    herm = np.vdot(u.values, (1j * s) @ u.values)  # i S is Hermitian
    assert abs(herm.imag) < 1e-12 * (1 + abs(herm))
