import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisenkit.extension import (NONLINEARITIES, CellQuadrature, CompactBump, ExtensionProblem, SolverError,
                                 WeightedForm, energy_descent, get_nonlinearity, lemma3_identities,
                                 random_direction, solve_linear_extension, solve_neumann_reaction, stability_form,
                                 stability_scan, weak_residual, weak_residual_terms, y_cell_weights, y_dual_weights)
from heisenkit.fields import GridField, SymbolicField, X
from heisenkit.grids import Box3, Box4, GeometryError

a_val = st.floats(-0.9, 0.9)
BOX = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (5, 5, 5, 4))


def _pts(form):
    return form.grid.points().reshape(-1, 4)


@given(a_val, st.floats(1.0, 1.2))
def test_y_weights_integrate_y_power(a, ratio):
    y = Box4((0, 0, 0, 0), (1, 1, 1, 2.0), (2, 2, 2, 9), y_ratio=ratio).y_axis()
    exact = 2.0 ** (1 + a) / (1 + a)
    assert y_cell_weights(y, a).sum() == pytest.approx(exact)
    assert y_dual_weights(y, a).sum() == pytest.approx(exact)
    assert np.all(y_cell_weights(y, a) > 0)


@given(a_val)
def test_cell_rule_exact_on_affine_in_y(a):
    # centroid nodes make int y^a (c0 + c1 y) exact per cell
    g = Box4((-1, -1, -1, 0), (1, 1, 1, 1.5), (3, 3, 3, 6)).grid()
    q = CellQuadrature(g, a)
    y = q.points()[..., 3]
    exact = 8 * (1.5 ** (1 + a) / (1 + a) + 2 * 1.5 ** (2 + a) / (2 + a))
    assert q.integrate(1 + 2 * y) == pytest.approx(exact, rel=1e-12)
    assert q.integrate_bottom(np.ones(q.bottom_weights.shape)) == pytest.approx(8.0)


@pytest.fixture(scope="module", params=[-0.5, 0.0, 0.6])
def form(request):
    return WeightedForm(BOX, request.param)


def test_form_symmetric_psd_kernel_constants(form):
    A = form.A.toarray()
    assert np.allclose(A, A.T, atol=1e-13)
    assert np.linalg.eigvalsh(A).min() > -1e-10
    assert np.abs(form.A @ np.ones(form.size)).max() < 1e-12


def test_dirichlet_energy_closed_forms(form):
    # [DERIVED] grad x1 = (1, 0, 0), grad y = (0, 0, 1): both energies are Vol3 int_0^1 y^a / 2
    p = _pts(form)
    exact = 0.5 * 8 / (1 + form.a)
    assert form.dirichlet_energy(p[:, 0]) == pytest.approx(exact)
    assert form.dirichlet_energy(p[:, 3]) == pytest.approx(exact)


def test_gradient_matches_energy_difference(form, rng):
    nl = NONLINEARITIES["allen_cahn"]
    u = rng.uniform(-0.8, 0.8, form.size)
    d = rng.normal(size=form.size)
    e = 1e-6
    fd = (form.energy(u + e * d, nl) - form.energy(u - e * d, nl)) / (2 * e)
    assert form.gradient(u, nl) @ d == pytest.approx(fd, rel=1e-6)
    q_fd = (form.gradient(u + e * d, nl) - form.gradient(u - e * d, nl)) @ d / (2 * e)
    assert form.quadratic(u, d, nl) == pytest.approx(q_fd, rel=1e-6)


def test_form_rejections():
    with pytest.raises(GeometryError):
        WeightedForm(Box3((0, 0, 0), (1, 1, 1), (3, 3, 3)), 0.0)
    with pytest.raises(GeometryError):
        WeightedForm(Box4((0, 0, 0, 0.5), (1, 1, 1, 1), (3, 3, 3, 3)), 0.0)
    with pytest.raises(GeometryError):
        WeightedForm(BOX, 0.0).face_mask(["z+"])


@pytest.mark.parametrize("name", sorted(NONLINEARITIES))
@given(st.floats(-1.5, 1.5))
def test_nonlinearity_derivatives(name, u):
    nl = get_nonlinearity(name)
    e = 1e-6
    assert (nl.F(u + e) - nl.F(u - e)) / (2 * e) == pytest.approx(nl.f(u), abs=1e-7)
    assert (nl.f(u + e) - nl.f(u - e)) / (2 * e) == pytest.approx(nl.fprime(u), abs=1e-6)


def test_allen_cahn_invariant_region_endpoints():
    nl = get_nonlinearity("allen_cahn")
    assert nl.f(np.array([-1.0, 0.0, 1.0])) == pytest.approx([0.0, 0.0, 0.0])
    with pytest.raises(GeometryError):
        get_nonlinearity("cubic")


def test_problem_json_roundtrip(tmp_path):
    p = ExtensionProblem(Box4((-1, -1, -2, 0), (1, 1, 2, 1), (5, 5, 5, 4), y_ratio=1.1), 0.3, "decay",
                         boundary_data="x1*x3", tol=1e-8, seed=4)
    p.to_json(tmp_path / "p.json")
    q = ExtensionProblem.from_json(tmp_path / "p.json")
    assert q.to_dict() == p.to_dict()
    d = p.to_dict()
    d.pop("s")
    d["a"] = 0.0
    assert ExtensionProblem.from_dict(d).s == 0.5
    with pytest.raises(GeometryError):
        ExtensionProblem(BOX, 1.0)
    with pytest.raises(GeometryError):
        ExtensionProblem(BOX, boundary="robin")


def test_linear_extension_reproduces_exact_solutions():
    box = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (7, 7, 7, 5))
    u = solve_linear_extension("x1 - 0.5*x2", 0.2, box, boundary_values=lambda p: p[:, 0] - 0.5 * p[:, 1])
    p = u.grid.points()
    assert np.max(np.abs(u.values - (p[..., 0] - 0.5 * p[..., 1]))) < 1e-8
    c = solve_linear_extension("0.7 + 0*x1", 0.0, box)
    assert np.max(np.abs(c.values - 0.7)) < 1e-3


@pytest.mark.parametrize("nl,c", [("zero", 0.3), ("allen_cahn", 1.0), ("allen_cahn", -1.0), ("decay", 0.0)])
def test_constant_equilibria(nl, c):
    u = solve_neumann_reaction(ExtensionProblem(BOX, 0.5, nl, boundary="neumann"), initial=c)
    assert np.max(np.abs(u.values - c)) < 1e-10


def test_descent_energy_is_monotone():
    box = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (7, 7, 7, 5))
    prob = ExtensionProblem(box, 0.5, "allen_cahn", boundary_data="tanh(2*x1)")
    u, info = energy_descent(prob, return_info=True)
    assert np.all(np.diff(info.energy_trace) <= 1e-12)
    assert info.residual < 1e-8
    assert np.abs(u.values).max() <= 1 + 1e-6


def test_solver_errors():
    with pytest.raises(GeometryError):
        energy_descent(ExtensionProblem(BOX, 0.5, "zero"))
    with pytest.raises(SolverError):
        solve_neumann_reaction(ExtensionProblem(BOX, 0.5, "allen_cahn", boundary_data="3 + 0*x1"))


@pytest.mark.parametrize("a", [0.0, 0.4])
def test_weak_residual_of_explicit_solution(a):
    # [DERIVED] u = y^(1-a): div(y^a grad u) = 0 and -y^a u_y = -(1 - a), a constant f
    g = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (9, 9, 9, 33)).grid()
    u = SymbolicField(f"y**{1 - a}", 4)
    xi = CompactBump((0.1, 0, 0, 0), (0.8, 0.8, 0.8, 0.8), k=4)
    t = weak_residual_terms(u, xi, a, lambda v: -(1 - a) + 0 * v, grid=g)
    assert abs(t["residual"]) < 2e-2 * abs(t["boundary"])


def test_weak_residual_needs_grid_and_alignment():
    with pytest.raises(GeometryError):
        weak_residual(SymbolicField("x1", 4), SymbolicField("x2", 4), 0.0, "zero")
    g1 = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (5, 5, 5, 4)).grid()
    g2 = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (7, 5, 5, 4)).grid()
    u = GridField.sample(SymbolicField("x1", 4), g1)
    v = GridField.sample(SymbolicField("x1", 4), g2)
    with pytest.raises(GeometryError):
        weak_residual(u, v, 0.0, "zero")


def test_stability_form_signs():
    g = Box4((-2, -2, -4, 0), (2, 2, 4, 2), (9, 9, 9, 7)).grid()
    zero = SymbolicField("0", 4)
    xi = CompactBump((0, 0, 0, 0), (1.5, 1.5, 3, 1.5), k=4)
    assert stability_form(zero, xi, 0.0, "decay", grid=g) > 0
    Q, n = stability_form(zero, xi, 0.0, "zero", grid=g, return_norm=True)
    assert 0 < Q < n


def test_compact_bump_support():
    b = CompactBump((0, 0, 0, 0), (1, 1, 1, 1), k=5)
    out = np.array([[1.2, 0, 0, 0], [0, 0, 0, 1.01]])
    assert np.all(b(out) == 0)
    assert np.all(X(b)(out) == 0)
    assert X(b)(np.array([[0.3, 0.1, 0.2, 0.1]]))[0] != 0
    d = random_direction(BOX, np.random.default_rng(0))
    lo, hi = d.support_box()
    assert np.all(lo[:3] >= -1) and np.all(hi[:3] <= 1)


def test_integration_by_parts_closed_form():
    # the two integration-by-parts identities, up to quadrature error
    g = Box4((-1, -1, -1, 0), (1, 1, 1, 1), (17, 17, 17, 17)).grid()
    u = SymbolicField("x1*x3 + sin(x2)*y", 4)
    xi = CompactBump((0, 0, 0, 0), (0.9, 0.9, 0.9, 0.9), k=6)
    for lhs, rhs in lemma3_identities(u, xi, 0.3, g).values():
        assert lhs == pytest.approx(rhs, rel=1e-2, abs=1e-3)


def test_descent_solution_is_stable_and_weakly_stationary(stable_solution):
    u = stable_solution
    rep = stability_scan(u, 0.0, "allen_cahn", n_directions=20, seed=3)
    assert rep.stable and rep.min_normalized > 0
    d = random_direction(Box4(tuple(u.grid.lower), tuple(u.grid.upper), u.grid.shape), np.random.default_rng(1))
    t = weak_residual_terms(u, d, 0.0, "allen_cahn")
    assert abs(t["residual"]) < 0.1 * t["scale"]
