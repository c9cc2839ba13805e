import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from heisenkit.fields import SymbolicField
from heisenkit.grids import Box3, sphere_point
from heisenkit.group import TruncationError, dilate, gauge_norm, group_inv
from heisenkit.kernels import (FractionalSublaplacian, KernelError, PoissonKernel, decay_slope, fractional_sublaplacian,
                               heat_flow_fd, heat_kernel, kohn_laplacian_fd, poisson_constant, poisson_kernel,
                               rho_norm, riesz_kernel, riesz_table, spectral_dtn_constant)

pt = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3)).map(np.array)


def _H_quad(alpha, beta):
    f = lambda m: np.cos(beta * m) * (m / np.sinh(m) if m > 0 else 1.0) * np.exp(-alpha * (m / np.tanh(m) if m > 0 else 1.0))
    return quad(f, 0, 80, limit=400)[0] / (16 * np.pi ** 2)


def test_origin_value(heat):
    # [DERIVED] int_0^inf mu / sinh mu = pi^2 / 4, so H(0, 0) = 1/64
    assert heat.H(0.0, 0.0) == pytest.approx(1 / 64, rel=1e-10)
    assert heat(0.25, np.zeros(3)) == pytest.approx(1 / 4, rel=1e-10)


@pytest.mark.parametrize("alpha,beta", [(0.1, 0.0), (0.5, 1.3), (2.0, 3.0), (6.0, 0.7), (0.0, 8.0)])
def test_table_against_direct_quadrature(heat, alpha, beta):
    assert heat.H(alpha, beta) == pytest.approx(_H_quad(alpha, beta), rel=1e-6, abs=1e-12)


@given(pt, st.floats(0.1, 4.0), st.floats(0.3, 3.0))
def test_heat_homogeneity_and_symmetry(heat, x, t, r):
    v = heat(t, x)
    assert r ** 4 * heat(r * r * t, dilate(r, x)) == pytest.approx(v, rel=1e-9, abs=1e-14)
    assert heat(t, group_inv(x)) == pytest.approx(v, rel=1e-12)
    assert 0 <= v <= 1 / (64 * t ** 2) * (1 + 1e-9)


def test_heat_equation_by_finite_differences(heat):
    # (d/dt - (X^2 + Y^2)) h = 0 at interior nodes
    box = Box3((-1, -1, -1.5), (1, 1, 1.5), (41, 41, 61))
    pts = box.grid().points()
    t, dt = 0.3, 1e-4
    dh = (heat(t + dt, pts) - heat(t - dt, pts)) / (2 * dt)
    lap = kohn_laplacian_fd(heat(t, pts), box.axes())
    c = (slice(4, -4),) * 3
    assert np.max(np.abs(dh[c] - lap[c])) / np.max(np.abs(dh[c])) < 2e-2


def test_kohn_laplacian_fd_exact_on_quadratics():
    box = Box3((-1, -1, -1), (1, 1, 1), (9, 9, 9))
    p = box.grid().points()
    u = SymbolicField("x1**2 + x1*x3 + x2*x3 + x3**2")
    from heisenkit.fields import kohn_laplacian
    ref = kohn_laplacian(u)(p)
    out = kohn_laplacian_fd(u(p), box.axes())
    assert np.allclose(out[1:-1, 1:-1, 1:-1], ref[1:-1, 1:-1, 1:-1], atol=1e-10)


def test_heat_table_mass_and_truncation(heat):
    box = Box3((-6, -6, -18), (6, 6, 18), (41, 41, 81))
    tab = heat_kernel([0.5, 1.0], box, heat=heat)
    assert np.all(tab.mass_defect < 1e-2)
    assert max(tab.homogeneity_residual.values()) < 1e-9
    assert tab.values.shape == (2, 41, 41, 81)
    with pytest.raises(TruncationError):
        heat_kernel([8.0], Box3((-1, -1, -1), (1, 1, 1), (9, 9, 9)), heat=heat)
    with pytest.raises(KernelError):
        heat_kernel([0.0], box, heat=heat)


def test_heat_flow_cross_check(heat):
    res = heat_flow_fd(Box3((-2, -2, -3), (2, 2, 3), (17, 17, 17)), 0.2, 0.3, heat)
    assert res.relative_error < 0.05


def test_poisson_constant_normalizes_mass():
    # [DERIVED] C_a y^(1-a) int t^((a-3)/2) e^(-y^2/4t) dt = C_a Gamma((1-a)/2) 2^(1-a) = 1
    for a in (-0.6, 0.0, 0.5):
        assert poisson_constant(a) * gamma((1 - a) / 2) * 2 ** (1 - a) == pytest.approx(1.0)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.75])
def test_poisson_kernel_properties(heat, s):
    K = PoissonKernel(s, heat)
    assert K.mass(1.0)["mass"] == pytest.approx(1.0, abs=1e-4)
    x = np.array([[0.3, -0.2, 0.5], [1.5, 1.0, -2.0], [0.0, 0.0, 4.0]])
    P = K(x, 1.0)
    assert np.all(P > 0)
    for y in (0.5, 2.0):
        assert y ** 4 * K(dilate(y, x), y) == pytest.approx(P, rel=1e-9)
    assert decay_slope(s, heat=heat) == pytest.approx(-4 - 2 * s, abs=0.05)


def test_poisson_errors(heat):
    with pytest.raises(KernelError):
        PoissonKernel(1.2, heat)
    with pytest.raises(KernelError):
        poisson_kernel(np.zeros(3) + 1, 1.0, a=1.0)
    with pytest.raises(KernelError):
        PoissonKernel(0.5, heat)(np.ones(3), -1.0)


def test_green_function_closed_form(heat):
    # [DERIVED] R_2 = int_0^inf h dt is the fundamental solution 1 / (8 pi |x|^2)
    om = sphere_point(np.linspace(-1.5, 1.5, 9), 0.7)
    x = np.concatenate([1.7 * om[:, :2], 1.7 ** 2 * om[:, 2:]], axis=1)
    assert riesz_kernel(2.0, x, heat) * 8 * np.pi * gauge_norm(x) ** 2 == pytest.approx(np.ones(9), rel=1e-5)


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0, -0.6, -1.4])
def test_riesz_homogeneity_and_sign(heat, beta):
    tab = riesz_table(beta, n_tau=3, n_theta=5, n_phi=2, heat=heat)
    assert tab.positive
    assert max(tab.homogeneity_residual.values()) < 1e-8


def test_riesz_and_rho_errors(heat):
    with pytest.raises(KernelError):
        riesz_kernel(4.0, np.ones(3), heat)
    with pytest.raises(KernelError):
        riesz_kernel(-2.0, np.ones(3), heat)
    with pytest.raises(KernelError):
        riesz_kernel(1.0, np.zeros(3), heat)
    with pytest.raises(KernelError):
        rho_norm(np.ones(3), alpha=2.0)


@given(pt.filter(lambda x: gauge_norm(x) > 0.1), st.floats(0.2, 5.0))
def test_rho_homogeneous_of_degree_one(heat, x, r):
    assert rho_norm(dilate(r, x), heat=heat) == pytest.approx(r * rho_norm(x, heat=heat), rel=1e-7)


@pytest.fixture(scope="module")
def frac(heat):
    return FractionalSublaplacian(0.5, n_near=12, n_far=32, n_theta=12, n_phi=16, heat=heat)


def test_fractional_kills_constants(frac):
    pts = np.array([[0.0, 0.0, 0.0], [0.5, -0.3, 1.0]])
    assert np.allclose(frac(SymbolicField("3.5"), pts), 0.0, atol=1e-12)


def test_literal_convention_is_minus_s_standard(heat):
    s = 0.4
    kw = dict(n_near=10, n_far=24, n_theta=10, n_phi=12, heat=heat)
    v = SymbolicField("exp(-(x1**2 + x2**2)**2 - x3**2)")
    p = np.array([[0.2, 0.1, -0.3]])
    std = FractionalSublaplacian(s, **kw)(v, p)
    lit = FractionalSublaplacian(s, convention="literal", **kw)(v, p)
    assert lit == pytest.approx(-s * std, rel=1e-12)
    assert std[0] > 0   # a positive operator is positive at the maximum of a bump


def test_fractional_truncation_guard(frac):
    with pytest.raises(TruncationError):
        fractional_sublaplacian(SymbolicField("1 + 0*x1"), np.zeros(3), 0.5, frac, truncation_tol=1e-12)


def test_fractional_errors():
    with pytest.raises(KernelError):
        FractionalSublaplacian(1.0)
    with pytest.raises(KernelError):
        FractionalSublaplacian(0.5, convention="other")


def test_spectral_constant():
    # [DERIVED] s = 1/2: 2^0 Gamma(1/2) / Gamma(1/2) = 1
    assert spectral_dtn_constant(0.5) == pytest.approx(1.0)
    assert spectral_dtn_constant(0.25) == pytest.approx(2 ** 0.5 * gamma(0.75) / gamma(0.25))
