import numpy as np
import pytest

from gpvortex import _kernels_py, kernels
from gpvortex.field import triangle_rule
from gpvortex.mesh import make_ellipse_mesh

compiled = pytest.importorskip("gpvortex._kernels", reason="compiled extension not built")


@pytest.fixture(scope="module")
def data():
    m = make_ellipse_mesh(2.0, 1.5, 60)
    rng = np.random.default_rng(0)
    bary, _ = triangle_rule(4)
    tris = np.ascontiguousarray(m.triangles, dtype=np.int64)
    return m, tris, np.ascontiguousarray(bary), rng


def test_backend_name():
    assert kernels.BACKEND in ("compiled", "numpy")


def test_eval_at_qp(data):
    m, tris, bary, rng = data
    v = rng.normal(size=m.n_vertices)
    np.testing.assert_allclose(compiled.eval_at_qp(tris, bary, v), _kernels_py.eval_at_qp(tris, bary, v),
                               rtol=1e-14, atol=1e-14)


def test_scatter_load(data):
    m, tris, bary, rng = data
    coef = rng.normal(size=(m.n_triangles, len(bary)))
    np.testing.assert_allclose(compiled.scatter_load(tris, bary, coef, m.n_vertices),
                               _kernels_py.scatter_load(tris, bary, coef, m.n_vertices), rtol=1e-13, atol=1e-13)


def test_weighted_mass_local(data):
    m, tris, bary, rng = data
    coef = rng.normal(size=(m.n_triangles, len(bary)))
    np.testing.assert_allclose(compiled.weighted_mass_local(tris, bary, coef),
                               _kernels_py.weighted_mass_local(tris, bary, coef), rtol=1e-13, atol=1e-13)


def test_triangle_winding(data):
    m, tris, bary, rng = data
    re, im = rng.normal(size=(2, m.n_vertices))
    re[:5] = im[:5] = 0.0  # exact zeros take the same branch in both
    a = compiled.triangle_winding(tris, re, im)
    b = _kernels_py.triangle_winding(tris, re, im)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a, np.rint(a), atol=1e-12)
