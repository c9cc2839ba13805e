import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heisenkit.fields import (ClosureField, Dy, GridField, HorizontalHessian, HorizontalVector, StencilError,
                              SymbolicField, T, X, Y, apply_T, apply_X, apply_Y, as_field, commutator_residual,
                              extended_gradient, hb_divergence, horizontal_gradient, horizontal_hessian,
                              kohn_laplacian, pointwise, polynomial_family, sample_points)
from heisenkit.grids import Box3, Box4, GeometryError
from heisenkit.group import group_mul

pts3 = arrays(np.float64, 3, elements=st.floats(-2, 2))


def test_operators_on_coordinates():
    # [DERIVED] X x3 = 2 x2, Y x3 = -2 x1, T x3 = -4
    u = SymbolicField("x3")
    p = np.array([0.3, -0.7, 1.1])
    assert apply_X(u, p) == pytest.approx(-1.4)
    assert apply_Y(u, p) == pytest.approx(-0.6)
    assert apply_T(u, p) == pytest.approx(-4.0)


def test_hessian_of_x3_is_antisymmetric():
    # [DERIVED] Hu = [[0, 2], [-2, 0]] for u = x3 (YXu = Y(2 x2) = 2, XYu = X(-2 x1) = -2)
    H = horizontal_hessian(SymbolicField("x3"), np.array([1.0, 0.0, 0.0]))
    assert np.allclose(H.matrix(), [[0.0, 2.0], [-2.0, 0.0]])
    assert H.commutator() == pytest.approx(-4.0)
    assert H.norm_sq == pytest.approx(8.0)
    assert np.allclose(H.squared(), 4 * np.eye(2))


@given(pts3)
def test_commutator_identity_closed_form(p):
    for u in polynomial_family(3, np.random.default_rng(3)):
        assert abs(commutator_residual(u, p)) < 1e-9
    assert abs(commutator_residual(SymbolicField("sin(x1*x3)+exp(x2)"), p)) < 1e-9 * 50


@given(pts3, pts3)
def test_left_invariance_of_X(z, p):
    x1, x2, x3 = sp.symbols("x1 x2 x3", real=True)
    e = sp.sin(x1) * x3 + x2 ** 2
    z1, z2, z3 = (sp.Float(float(c)) for c in z)
    ez = e.subs({x1: z1 + x1, x2: z2 + x2, x3: z3 + x3 + 2 * (z2 * x1 - z1 * x2)}, simultaneous=True)
    lhs = apply_X(SymbolicField(ez), p)
    rhs = apply_X(SymbolicField(e), group_mul(z, p))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_kohn_laplacian_expanded_form():
    # [DERIVED] X^2 + Y^2 = d11 + d22 + 4 x2 d13 - 4 x1 d23 + 4 r^2 d33
    u = SymbolicField("x1**2*x3 + x2*x3**2")
    x1, x2, x3 = u.symbols
    e = u.expr
    expanded = (sp.diff(e, x1, 2) + sp.diff(e, x2, 2) + 4 * x2 * sp.diff(e, x1, x3) - 4 * x1 * sp.diff(e, x2, x3)
                + 4 * (x1 ** 2 + x2 ** 2) * sp.diff(e, x3, 2))
    assert sp.simplify(kohn_laplacian(u).expr - expanded) == 0


def test_closure_field_matches_symbolic():
    u = SymbolicField("sin(x1)*cos(x2)+x3**2")
    c = ClosureField(u, 3, step=1e-4)
    p = sample_points(20, (-1, -1, -1), (1, 1, 1))
    for op in (X, Y, T):
        assert np.allclose(op(c)(p), op(u)(p), atol=1e-6)
    assert np.allclose(X(Y(c))(p), X(Y(u))(p), atol=1e-5)


def test_closure_field_domain_margin():
    box = Box3((-1, -1, -1), (1, 1, 1), (3, 3, 3))
    c = ClosureField(lambda p: p[..., 0], 3, domain=box, step=0.1)
    assert X(c)(np.array([0.85, 0, 0])) == pytest.approx(1.0)
    with pytest.raises(StencilError):
        X(X(c))(np.array([0.85, 0, 0]))


def test_grid_field_second_order_and_margins():
    u = SymbolicField("sin(x1)*cos(x2)*exp(x3/2)")
    p = np.array([[0.1, 0.2, -0.1]])
    errs = []
    for n in (17, 33):
        g = Box3((-1, -1, -1), (1, 1, 1), (n, n, n)).grid()
        gu = GridField.sample(u, g)
        errs.append(abs(X(gu)(p)[0] - X(u)(p)[0]))
        # X = d1 + 2 x2 d3 never differences along x2
        assert np.array_equal(X(gu).margins, [[1, 1], [0, 0], [1, 1]])
        assert X(X(gu)).margins.max() == 2
    assert errs[0] / errs[1] > 3.5
    with pytest.raises(StencilError):
        X(gu)(np.array([1.0, 0.0, 0.0]))


def test_grid_field_node_lookup_is_exact():
    g = Box3((0, 0, 0), (1, 1, 1), (5, 5, 5)).grid()
    vals = np.random.default_rng(0).normal(size=g.shape)
    gu = GridField(vals, g)
    assert np.array_equal(gu(g.points()), vals)
    mid = np.array([0.125, 0.125, 0.125])
    assert gu(mid) == pytest.approx(vals[:2, :2, :2].mean())


def test_grid_field_one_sided_y():
    g = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (5, 5, 5, 9)).grid()
    gu = GridField.sample(SymbolicField("y**2 + x1", 4), g)
    d = Dy(gu)
    assert np.array_equal(d.margins[3], [0, 1])
    assert d(np.array([0, 0, 0, 0.0])) == pytest.approx(0.0, abs=1e-12)


def test_pointwise_and_kind_mixing():
    a, b = SymbolicField("x1"), SymbolicField("x2")
    s = pointwise(lambda xp, u, v: xp.sqrt(u * u + v * v), a, b)
    assert s(np.array([3.0, 4.0, 0.0])) == pytest.approx(5.0)
    with pytest.raises(TypeError):
        pointwise(lambda xp, u, v: u + v, a, ClosureField(lambda p: p[..., 0]))


def test_gradients_and_divergence_4d():
    u = SymbolicField("x1*y + x3", 4)
    Z = np.array([0.5, 1.0, 0.0, 2.0])
    assert extended_gradient(u, Z) == pytest.approx((4.0, -1.0, 0.5))
    hv = horizontal_gradient(u, Z)
    assert hv.norm == pytest.approx(np.hypot(4.0, -1.0))
    # div (X u, Y u, d_y u) for u = x1 y: X(y) + 0 + 0 = 0 ... plus Y(-2 x1 d3 u) terms vanish
    assert hb_divergence(SymbolicField("y", 4), SymbolicField("0", 4), SymbolicField("y**2", 4), Z) == pytest.approx(4.0)
    with pytest.raises(GeometryError):
        Dy(SymbolicField("x1"))
    with pytest.raises(GeometryError):
        u(np.zeros(3))


def test_horizontal_types():
    v = HorizontalVector(np.array(1.0), np.array(0.0))
    H = HorizontalHessian(1.0, 2.0, 3.0, 4.0)
    w = H.matvec(v)
    assert (w.alpha, w.beta) == (1.0, 3.0)
    assert v.dot(w) == 1.0


def test_as_field_dispatch():
    assert isinstance(as_field("x1"), SymbolicField)
    assert isinstance(as_field(lambda p: p[..., 0]), ClosureField)
    with pytest.raises(TypeError):
        as_field(3)
