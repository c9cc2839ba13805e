"""Verification suites.

Each suite returns a :class:`SuiteReport` made of named checks with the
measured value, the tolerance and the verdict.  Reports carry no timings or
host data, so a fixed seed gives identical JSON bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import __version__
from .extension import (BumpDirection, CompactBump, ExtensionProblem, energy_descent, lemma3_identities,
                        solve_linear_extension, solve_neumann_reaction, stability_scan, weak_residual_terms)
from .fields import (COORD_NAMES, GridField, SymbolicField, T, X, Y, commutator_residual, polynomial_family,
                     sample_points)
from .grids import Box3, Box4, GeometryError, PolarQuadrature
from .group import dilate, extended_norm, gauge_norm, group_inv, group_mul
from .kernels import (PoissonKernel, PoissonLift, decay_slope, default_heat_kernel, dirichlet_to_neumann_ratio,
                      fractional_sublaplacian, heat_flow_fd, heat_kernel, poisson_table, semigroup_defect,
                      spectral_dtn_constant)
from .levelset import lemma4_check
from .rigidity import (BallRule, EnergyProfile, c5_quadrature, capacity_cutoff,
                       capacity_gradient_sq, energy_density, geometric_inequality_report, growth_criterion,
                       lemma5_bound, weighted_energy)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    relation: str = "<="   # value <= tol, or value >= tol with ">="
    note: str = ""

    @property
    def passed(self) -> bool:
        v = float(self.value)
        if not np.isfinite(v):
            return False
        return v <= self.tol if self.relation == "<=" else v >= self.tol

    def as_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "tol": float(self.tol), "relation": self.relation,
                "passed": self.passed, "note": self.note}


@dataclass
class SuiteReport:
    suite: str
    tags: list
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"suite": self.suite, "eq": self.tags, "passed": self.passed, "checks": [c.as_dict() for c in self.checks],
                "data": self.data, "config": self.config, "version": __version__}


class _Ctx:
    def __init__(self, name, tags, seed, tol_scale, threads, config):
        self.cfg = dict(config or {})
        self.rng = np.random.default_rng(seed)
        self.ts = tol_scale
        self.threads = threads
        self.report = SuiteReport(name, tags, config={"seed": seed, "tol_scale": tol_scale, **self.cfg})

    def get(self, key, default):
        return self.cfg.get(key, default)

    def check(self, name, value, tol, relation="<=", note="", scale=True):
        t = tol * self.ts if (scale and relation == "<=") else tol
        self.report.checks.append(Check(name, float(value), float(t), relation, note))


# ----------------------------------------------------------------------------- group

def suite_group(ctx: _Ctx):
    n = ctx.get("n_triples", 1000)
    p, q, r = (ctx.rng.normal(size=(n, 3)) for _ in range(3))
    e = np.zeros(3)
    lhs, rhs = group_mul(group_mul(p, q), r), group_mul(p, group_mul(q, r))
    ctx.check("associativity", np.max(np.abs(lhs - rhs)), 1e-12)
    ctx.check("identity", max(np.max(np.abs(group_mul(p, e) - p)), np.max(np.abs(group_mul(e, p) - p))), 1e-12)
    ctx.check("inverse", max(np.max(np.abs(group_mul(p, group_inv(p)))), np.max(np.abs(group_mul(group_inv(p), p)))),
              1e-12)
    lam = np.exp(ctx.rng.uniform(-1.5, 1.5, size=8))
    auto = max(np.max(np.abs(dilate(l, group_mul(p, q)) - group_mul(dilate(l, p), dilate(l, q)))) / max(1, l * l)
               for l in lam)
    ctx.check("dilation_automorphism", auto, 1e-12)
    hom = max(np.max(np.abs(gauge_norm(dilate(l, p)) - l * gauge_norm(p)) / (l * gauge_norm(p))) for l in lam)
    ctx.check("gauge_homogeneity", hom, 1e-12)
    ctx.check("gauge_symmetry", np.max(np.abs(gauge_norm(group_inv(p)) - gauge_norm(p))), 1e-12)


# ----------------------------------------------------------------------------- operators

COMMUTATOR_FIELDS = ("sin(x1)*cos(x2)*exp(x3/2)", "exp(-(x1**2+x2**2+x3**2)/2)", "cos(x1+x2*x3)",
                     "x1**2*x3+sin(x2)", "1/(2+x1**2+x2**2+x3**2)")


def _translated(expr: str, z) -> SymbolicField:
    x1, x2, x3 = sp.symbols(COORD_NAMES[:3], real=True)
    z1, z2, z3 = (sp.Float(float(c)) for c in z)
    e = sp.sympify(expr, locals={"x1": x1, "x2": x2, "x3": x3})
    sub = {x1: z1 + x1, x2: z2 + x2, x3: z3 + x3 + 2 * (z2 * x1 - z1 * x2)}
    return SymbolicField(e.subs(sub, simultaneous=True))


def suite_operators(ctx: _Ctx):
    levels = ctx.get("levels", [13, 25, 49])
    probe = np.stack(np.meshgrid(*[np.linspace(-0.5, 0.5, 7)] * 3, indexing="ij"), -1)
    orders, table = [], {}
    for expr in COMMUTATOR_FIELDS:
        u = SymbolicField(expr)
        errs = []
        for n in levels:
            g = Box3((-1, -1, -1), (1, 1, 1), (n, n, n)).grid()
            errs.append(float(np.max(np.abs(commutator_residual(GridField.sample(u, g), probe)))))
        errs = np.array(errs)
        rates = np.log2(errs[:-1] / errs[1:])
        orders.append(float(rates[-1]))
        table[expr] = {"residual": errs, "orders": rates}
        closed = np.max(np.abs(commutator_residual(u, probe)))
        ctx.check(f"commutator_closed_form[{expr}]", closed, 1e-10)
    ctx.check("commutator_order_min", min(orders), 1.9, ">=")
    pts = sample_points(200, (-1, -1, -1), (1, 1, 1), ctx.rng)
    worst = 0.0
    for expr in COMMUTATOR_FIELDS:
        z = ctx.rng.normal(size=3)
        u, uz = SymbolicField(expr), _translated(expr, z)
        zp = group_mul(np.broadcast_to(z, pts.shape), pts)
        for op in (X, Y, T):
            a, b = op(uz)(pts), op(u)(zp)
            worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))))
    ctx.check("left_invariance", worst, 1e-10)
    ctx.report.data["commutator"] = table


# ----------------------------------------------------------------------------- level-set identities

def suite_lemma4(ctx: _Ctx):
    per = ctx.get("points_per_field", 2000)
    fam = polynomial_family(3, ctx.rng)
    total, worst1, worst2 = 0, 0.0, 0.0
    for u in fam:
        pts = sample_points(per, (-2, -2, -2), (2, 2, 2), ctx.rng)
        G = np.hypot(X(u)(pts), Y(u)(pts))
        pts = pts[G > 1e-3]
        r1, r2 = lemma4_check(u, pts).relative_errors()
        worst1, worst2 = max(worst1, float(r1.max())), max(worst2, float(r2.max()))
        total += pts.shape[0]
    ctx.check("identity1_relerr", worst1, 1e-8)
    ctx.check("identity2_relerr", worst2, 1e-8)
    ctx.check("regular_points", total, 1e4, ">=")
    vals = lemma4_check(SymbolicField("x3"), np.array([[1.0, 0.0, 0.0]]))
    ctx.check("anchor_x3_lhs1", abs(vals.lhs1[0] - 4.0), 1e-10)
    ctx.check("anchor_x3_rhs1", abs(vals.rhs1[0] - 4.0), 1e-10)
    ctx.report.data["n_fields"] = len(fam)


# ----------------------------------------------------------------------------- integration by parts

LEMMA3_U = "sin(x1+x3/2)*cos(x2)*exp(-y)+x1*x2*y"


def suite_lemma3(ctx: _Ctx):
    levels = ctx.get("levels", [12, 24])
    u = SymbolicField(ctx.get("u", LEMMA3_U), 4)
    xi = CompactBump((0.1, -0.1, 0.2, 0.0), (1.0, 1.0, 1.5, 1.0), k=6)
    out = {}
    for a in ctx.get("a_values", [0.0, 0.4]):
        errs = {"X": [], "Y": []}
        for n in levels:
            box = Box4((-1.2, -1.2, -1.8, 0), (1.2, 1.2, 1.8, 1.2), (n + 1, n + 1, n + 1, n // 2 + 1))
            for k, (l, r) in lemma3_identities(u, xi, a, box.grid()).items():
                errs[k].append(abs(l - r) / max(abs(l), abs(r)))
        for k, e in errs.items():
            ctx.check(f"relerr_base[{k},a={a}]", e[0], 1e-3)
            ctx.check(f"order[{k},a={a}]", np.log2(e[-2] / e[-1]), 1.9, ">=")
        out[str(a)] = errs
    ctx.report.data["relative_errors"] = out


# ----------------------------------------------------------------------------- kernels

def suite_kernels(ctx: _Ctx):
    heat = default_heat_kernel()
    box = Box3((-8, -8, -24), (8, 8, 24), (48, 48, 96))
    tab = heat_kernel(np.geomspace(0.25, 1.0, 5), box, {"mass_tol": 1.0})
    ctx.check("heat_mass_defect", tab.mass_defect.max(), 1e-3)
    ctx.check("heat_homogeneity", max(tab.homogeneity_residual.values()), 1e-2)
    pts = sample_points(6, (-1, -1, -1), (1, 1, 1), ctx.rng)
    sg = semigroup_defect(heat, 0.3, 0.4, pts, Box3((-7, -7, -20), (7, 7, 20), (48, 48, 48)))
    ctx.check("heat_semigroup", sg, 1e-2)
    # independent oracle: explicit finite-difference heat flow from h(0.2) to h(0.3)
    fd = [heat_flow_fd(Box3((-2, -2, -3), (2, 2, 3), (n, n, n)), 0.2, 0.3, heat).relative_error for n in (17, 25, 33)]
    ctx.check("heat_fd_flow_relerr", fd[-1], 2e-2)
    ctx.check("heat_fd_flow_order", np.log(fd[1] / fd[2]) / np.log(32 / 24), 1.8, ">=")
    s = ctx.get("s", 0.5)
    pt = poisson_table(s, [0.5, 2.0], Box3((-2, -2, -3), (2, 2, 3), (9, 9, 9)), heat)
    ctx.check("poisson_min_value", pt.values.min(), 0.0, ">=")
    ctx.check("poisson_scaling", pt.scaling_residual.max(), 1e-2)
    mass = PoissonKernel(s, heat).mass(1.0)["mass"]
    ctx.check("poisson_mass", abs(mass - 1.0), 1e-2)
    slope = decay_slope(s, heat=heat)
    ctx.check("poisson_decay_slope", abs(slope + (2 * s + 4)), 0.3)
    ctx.report.data.update(heat=tab.sidecar(), poisson=pt.sidecar(), poisson_mass=mass, decay_slope=slope)


# ----------------------------------------------------------------------------- fractional operator

DTN_TRACES = ("exp(-(x1**2+x2**2+x3**2/2))", "exp(-((x1-0.3)**2+x2**2+x3**2))*(1+x1/2)")


def suite_fractional(ctx: _Ctx):
    s = ctx.get("s", 0.5)
    pts = sample_points(20, (-0.8, -0.8, -0.8), (0.8, 0.8, 0.8), ctx.rng)
    const = np.max(np.abs(fractional_sublaplacian("3+0*x1", pts, s)))
    ctx.check("constant_maps_to_zero", const, 1e-8)
    v = DTN_TRACES[0]
    lam = 1.7
    x1, x2, x3 = sp.symbols(COORD_NAMES[:3], real=True)
    e = sp.sympify(v, locals={"x1": x1, "x2": x2, "x3": x3})
    vl = SymbolicField(e.subs({x1: lam * x1, x2: lam * x2, x3: lam ** 2 * x3}, simultaneous=True))
    lhs = fractional_sublaplacian(vl, pts[:6], s)
    rhs = lam ** (2 * s) * fractional_sublaplacian(v, dilate(lam, pts[:6]), s)
    ctx.check("dilation_covariance", np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)), 2e-2)
    ratios = []
    for tr in DTN_TRACES:
        rep = dirichlet_to_neumann_ratio(tr, s, [0.01, 0.02], pts)
        ratios.append(rep.extrapolated[rep.mask])
    r = np.concatenate(ratios)
    ctx.check("dtn_cv", np.std(r) / abs(np.mean(r)), 5e-2)
    ctx.check("dtn_points_used", r.size, 20, ">=")
    ctx.report.data.update(dtn_mean=float(np.mean(r)), spectral_constant=spectral_dtn_constant(s))


# ----------------------------------------------------------------------------- extension

EXT_BOX = ((-1.5, -1.5, -2.0, 0.0), (1.5, 1.5, 2.0, 1.5))
EXT_DATA = "tanh(2*x1+x2*x3)"


def descent_solution(counts=(17, 17, 17, 12), data: str = EXT_DATA, s: float = 0.5):
    box = Box4(*EXT_BOX, counts)
    return energy_descent(ExtensionProblem(box, s, "allen_cahn", boundary_data=data))


def suite_extension(ctx: _Ctx):
    # linear extension against the Poisson lift on the interior
    v = "exp(-(x1**2+x2**2+x3**2/2))"
    box = Box4((-2, -2, -3, 0), (2, 2, 3, 2), tuple(ctx.get("linear_counts", [17, 17, 17, 12])))
    lin = solve_linear_extension(v, 0.0, box)
    pts = box.grid().points()
    inner = ((np.abs(pts[..., 0]) <= 1) & (np.abs(pts[..., 1]) <= 1) & (np.abs(pts[..., 2]) <= 1.5)
             & (pts[..., 3] > 0) & (pts[..., 3] <= 1))
    ref = PoissonLift(0.5, PolarQuadrature(1e-3, 1e4, 96, 16, 16)).extension_field(v)(pts[inner])
    ctx.check("linear_vs_lift_sup", np.max(np.abs(lin.values[inner] - ref)) / np.max(np.abs(ref)), 5e-2)
    # exact equilibria
    small = Box4(*EXT_BOX, (9, 9, 9, 7))
    for nl, c in (("zero", 0.3), ("allen_cahn", 1.0), ("allen_cahn", -1.0), ("allen_cahn", 0.0)):
        u = solve_neumann_reaction(ExtensionProblem(small, 0.5, nl, boundary_data=f"{c}+0*x1"))
        ctx.check(f"equilibrium[{nl},{c}]", np.max(np.abs(u.values - c)), 1e-10)
    # weak residual ladder
    xi = BumpDirection(np.array([0.2, -0.1, 0.3, 0.0]), np.array([0.9, 0.9, 1.2, 0.9]),
                       np.array([1.0, 0.5, -0.3, 0.2, 0.1]))
    ladder = ctx.get("ladder", [[9, 9, 9, 7], [13, 13, 13, 9], [17, 17, 17, 12]])
    h, res = [], []
    for c in ladder:
        u = descent_solution(tuple(c))
        res.append(abs(weak_residual_terms(u, xi, 0.0, "allen_cahn")["residual"]))
        h.append((EXT_BOX[1][0] - EXT_BOX[0][0]) / (c[0] - 1))
    h, res = np.array(h), np.array(res)
    C = res / h ** 2
    slope = np.polyfit(np.log(h), np.log(res), 1)[0]
    ctx.check("weak_residual_order", slope, 1.8, ">=")
    ctx.check("weak_residual_C_spread", C.max() / C.min(), 2.0)
    st = stability_scan(u, 0.0, "allen_cahn", ctx.get("n_directions", 200), seed=int(ctx.rng.integers(2 ** 31)))
    ctx.check("stability_min_Q_normalized", st.min_normalized, -1e-6, ">=")
    ctx.report.data.update(weak_residual={"h": h, "residual": res, "C": C, "slope": slope},
                           stability={"min_Q": st.min_Q, "min_normalized": st.min_normalized})


# ----------------------------------------------------------------------------- radial bound and the cutoff

def _random_piecewise(rule: BallRule, rng, blocks=(4, 4, 4, 3)):
    shp = rule.cells.weights.shape
    coarse = rng.uniform(0, 1, size=blocks) * (rng.uniform(size=blocks) < 0.7)
    idx = np.ix_(*[np.minimum(np.arange(n) * b // n, b - 1) for n, b in zip(shp, blocks)])
    return coarse[idx]


def suite_lemma5(ctx: _Ctx):
    q = ctx.get("q", 4.0)
    r, R = ctx.get("r", 1.0), ctx.get("R", 2.0)
    grid = Box4((-2, -2, -4, 0), (2, 2, 4, 2), tuple(ctx.get("counts", [41, 41, 57, 21]))).grid()
    c5 = c5_quadrature()
    res = lemma5_bound(1.0, r, R, q, grid)
    ctx.check("closed_form_lhs_over_c5", abs(res.lhs / c5 - 5.0), 0.05, note="g = 1, q = 4, r = 1, R = 2")
    ctx.check("closed_form_rhs_over_c5", abs(res.rhs / c5 - 6.0), 0.05)
    ctx.check("c5_quadrature_vs_closed_form", abs(c5 - 4 * np.pi ** 2 / 15), 1e-12)
    ctx.report.data["closed_form"] = {"lhs_over_c5": res.lhs / c5, "rhs_over_c5": res.rhs / c5,
                                      "error_estimate_over_c5": res.error_estimate / c5, "c5": c5}
    zero = lemma5_bound(0.0, r, R, q, grid)
    ctx.check("zero_field", abs(zero.lhs) + abs(zero.rhs), 0.0)
    # random nonnegative piecewise fields
    cg = Box4((-2, -2, -4, 0), (2, 2, 4, 2), (17, 17, 25, 9)).grid()
    rule = BallRule(cg, 0.0)
    worst = -np.inf
    for _ in range(ctx.get("n_random", 100)):
        g = _random_piecewise(rule, ctx.rng)
        rr = ctx.rng.uniform(0.6, 1.4)
        RR = ctx.rng.uniform(rr + 0.3, 2.0)
        qq = ctx.rng.uniform(0.5, 6.0)
        b = lemma5_bound(g, rr, RR, qq, cg, n_tau=32)
        worst = max(worst, (b.lhs - b.rhs - 3 * b.error_estimate) / max(b.rhs, 1e-300))
    ctx.check("random_fields_lhs_minus_rhs", worst, 0.0, scale=False)
    # energy homogeneity for u = x1
    u = SymbolicField("x1", 4)
    for a in (0.0, 0.4):
        pr = weighted_energy(u, a, [1.0, 2.0], grid)
        ctx.check(f"energy_homogeneity[a={a}]", abs(pr.eta[1] / pr.eta[0] / 2 ** (7 + a) - 1), 1e-2)
    # cutoff: closed-form gradient against centred differences
    Rc = 4.0
    Z = ctx.rng.normal(size=(50, 4))
    Z[:, 3] = np.abs(Z[:, 3])
    lam = np.exp(ctx.rng.uniform(np.log(2.05), np.log(3.95), 50)) / extended_norm(Z)
    Z = np.stack([Z[:, 0] * lam, Z[:, 1] * lam, Z[:, 2] * lam ** 2, Z[:, 3] * lam], -1)
    hs = 1e-5
    ones, zeros = np.ones(50), np.zeros(50)
    dirs = [np.stack([ones, zeros, 2 * Z[:, 1], zeros], -1), np.stack([zeros, ones, -2 * Z[:, 0], zeros], -1),
            np.tile([0.0, 0.0, 0.0, 1.0], (50, 1))]
    fd = [(capacity_cutoff(Z + hs * d, Rc) - capacity_cutoff(Z - hs * d, Rc)) / (2 * hs) for d in dirs]
    exact = capacity_gradient_sq(Z, Rc)
    ctx.check("cutoff_gradient_vs_fd", np.max(np.abs(sum(f * f for f in fd) - exact) / exact), 1e-4)
    ctx.check("cutoff_branch_inner", abs(capacity_cutoff(np.array([np.sqrt(np.sqrt(Rc)), 0, 0, 0.0]), Rc) - 1), 1e-12)
    ctx.check("cutoff_branch_outer", abs(capacity_cutoff(np.array([0, 0, 0, Rc]), Rc)), 1e-12)
    # cutoff identity: int |grad_H u|^2 |grad phi|^2 = log^-2 R int_A g |Z|^-4
    big = Box4((-4, -4, -16, 0), (4, 4, 16, 4), (33, 33, 65, 17)).grid()
    w = SymbolicField("x1+x2*x3/3", 4)
    br = BallRule(big, 0.0)
    P = br.cells.points()
    lhs = br.cells.integrate((X(w)(P) ** 2 + Y(w)(P) ** 2) * capacity_gradient_sq(P, Rc))
    rhs = br.cells.integrate(energy_density(w, br) * br.center_norm ** -4.0
                             * (br.fraction(Rc) - br.fraction(np.sqrt(Rc)))) / np.log(Rc) ** 2
    ctx.check("cutoff_identity", abs(lhs - rhs) / rhs, 1e-2)
    # growth criterion closed forms
    tau = np.geomspace(0.5, 2000, 400)
    Rl = np.array([4.0, 16, 64, 256, 1000])
    c4 = growth_criterion(EnergyProfile(tau, tau ** 4), Rl)
    c5p = growth_criterion(EnergyProfile(tau, tau ** 5), Rl)
    ex4 = (0.5 * np.log(Rl) + 1) / np.log(Rl) ** 2
    ex5 = (2 * Rl - np.sqrt(Rl)) / np.log(Rl) ** 2
    ctx.check("growth_tau4", np.max(np.abs(c4.quotient / ex4 - 1)), 1e-8)
    ctx.check("growth_tau5", np.max(np.abs(c5p.quotient / ex5 - 1)), 1e-8)
    ctx.check("growth_tau5_flagged", float(c5p.criterion_failure and not c4.criterion_failure), 1.0, ">=")
    ctx.report.data.update(c5=c5, lhs=res.lhs, rhs=res.rhs, error_estimate=res.error_estimate,
                           lhs_over_c5=res.lhs / c5, rhs_over_c5=res.rhs / c5)


# ----------------------------------------------------------------------------- geometric inequality

INEQ_CLOSED_U = ("tanh(2*x1+x2*x3)*exp(-y)", "x1**2+x2*x3+y*x1", "sin(x1)*cos(x2+x3)*exp(-y*y)")


def suite_inequality17(ctx: _Ctx):
    g = Box4((-1.5, -1.5, -2, 0), (1.5, 1.5, 2, 1.5), (21, 21, 21, 11)).grid()
    phi = CompactBump((0, 0, 0, 0), (1.2, 1.2, 1.6, 1.2), k=4)
    for e in INEQ_CLOSED_U:
        r = geometric_inequality_report(SymbolicField(e, 4), phi, 0.0, grid=g)
        ctx.check(f"forms_agree[{e}]", abs(r.rhs_hessian_form - r.rhs_curvature_form) / r.scale, 1e-6)
    c = geometric_inequality_report(SymbolicField("3", 4), phi, 0.0, grid=g)
    ctx.check("constant_u", abs(c.lhs) + abs(c.rhs_hessian_form) + abs(c.rhs_curvature_form), 1e-14)
    u = descent_solution(tuple(ctx.get("counts", [17, 17, 17, 12])))
    phi2 = CompactBump((0, 0, 0, 0), (0.9, 0.9, 1.2, 0.9), k=4)
    rep = geometric_inequality_report(u, phi2, 0.0)
    ctx.check("stable_margin_over_scale", rep.margin / rep.scale, -1e-3, ">=")
    ctx.check("regular_nodes", rep.n_regular, 1, ">=")
    ctx.report.data["stable_solution"] = rep.as_dict()


SUITES = {
    "group": (suite_group, ["eq:2-1a", "eq:4-1"]),
    "operators": (suite_operators, ["eq:2-5"]),
    "lemma3": (suite_lemma3, ["eq:3-1", "eq:3-2"]),
    "lemma4": (suite_lemma4, ["lemma4"]),
    "kernels": (suite_kernels, ["eq:2-3", "eq:2-4"]),
    "fractional": (suite_fractional, ["eq:1-1b", "rho-norm"]),
    "extension": (suite_extension, ["eq:1-3", "eq:1-5", "eq:4-5"]),
    "lemma5": (suite_lemma5, ["lemma5", "eq:4-3", "eq:4-4", "eq:1-10"]),
    "inequality17": (suite_inequality17, ["eq:1-7", "eq:3-3", "eq:1-9"]),
}


def run_suite(name: str, *, seed: int = 0, tol_scale: float = 1.0, threads: int = 1,
              config: dict | None = None) -> SuiteReport:
    """Run one suite.  Input errors (for example q <= 0) propagate as exceptions."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    if not tol_scale > 0:
        raise GeometryError("tol_scale must be positive")
    fn, tags = SUITES[name]
    ctx = _Ctx(name, tags, seed, tol_scale, threads, config)
    fn(ctx)
    return ctx.report


__all__ = ["Check", "SuiteReport", "SUITES", "run_suite", "descent_solution"]
