"""Weighted energy, the radial bound, the capacity cutoff, the growth
criterion and the two-sided geometric inequality.

Extended balls are B(0, tau) = {|Z| < tau, y > 0} with
|Z|^2 = sqrt((x1^2 + x2^2)^2 + x3^2) + y^2.  Ball integrals use a cell rule
on the Box4 grid.  A cell cut by the sphere gets the fraction
sum(d+) / sum(|d|) of its 16 corner values d = tau - |Z|, which is exact for
a profile linear across the cell.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .extension import CellQuadrature, grid_cell_gradient, y_dual_weights
from .fields import Dy, GridField, ScalarField, T, X, Y, as_field
from .grids import Box4, GeometryError, TensorGrid
from .group import extended_norm
from .levelset import default_eps_grad, lemma4_terms


class CoverageError(GeometryError):
    """A requested ball or radius range is not covered by the data."""


def _z_norm(pts):
    return extended_norm(np.asarray(pts, dtype=float))


class BallRule:
    """Cell rule with fractional cells for B(0, tau) on a Box4 grid (y^a weight exact)."""

    def __init__(self, grid: TensorGrid, a: float = 0.0):
        self.grid, self.a = grid, a
        self.cells = CellQuadrature(grid, a)
        self.center_norm = _z_norm(self.cells.points())
        self.node_norm = _z_norm(grid.points())
        lo, hi = grid.lower, grid.upper
        self.max_tau = float(min(-lo[0], hi[0], -lo[1], hi[1], np.sqrt(max(min(-lo[2], hi[2]), 0.0)), hi[3]))
        if grid.lower[3] != 0:
            raise GeometryError("ball quadrature needs the y axis to start at 0")

    def _corners(self):
        if not hasattr(self, "_cmin"):
            n = self.node_norm
            shp = self.cells.weights.shape
            self._offsets = list(itertools.product((0, 1), repeat=4))
            self._cmin = np.full(shp, np.inf)
            self._cmax = np.full(shp, -np.inf)
            for off in self._offsets:
                c = n[tuple(slice(o, m - 1 + o) for o, m in zip(off, n.shape))]
                np.minimum(self._cmin, c, out=self._cmin)
                np.maximum(self._cmax, c, out=self._cmax)
        return self._cmin, self._cmax

    def fraction(self, tau: float) -> np.ndarray:
        cmin, cmax = self._corners()
        out = (cmax <= tau).astype(float)
        cut = np.nonzero((cmin < tau) & (cmax > tau))
        if cut[0].size:
            pos = np.zeros(cut[0].size)
            tot = np.zeros_like(pos)
            for off in self._offsets:
                d = tau - self.node_norm[tuple(i + o for i, o in zip(cut, off))]
                pos += np.maximum(d, 0.0)
                tot += np.abs(d)
            out[cut] = pos / tot
        return out

    def check(self, tau):
        if np.max(tau) > self.max_tau * (1 + 1e-12):
            raise CoverageError(f"ball of radius {np.max(tau):.3g} exceeds the box (max {self.max_tau:.3g})")

    def integrate(self, g_cells, tau: float) -> float:
        self.check(tau)
        return float(np.sum(self.cells.weights * g_cells * self.fraction(tau)))

    def boundary_cells(self, tau: float) -> np.ndarray:
        f = self.fraction(tau)
        return (f > 0) & (f < 1)


def _cell_values(field_or_array, rule: BallRule):
    if isinstance(field_or_array, np.ndarray):
        if field_or_array.shape != rule.cells.weights.shape:
            raise GeometryError("cell arrays must match the cell grid")
        return field_or_array
    if isinstance(field_or_array, (int, float)):
        return np.full(rule.cells.weights.shape, float(field_or_array))
    return np.asarray(as_field(field_or_array, 4)(rule.cells.points()), dtype=float)


@dataclass
class EnergyProfile:
    tau: np.ndarray
    eta: np.ndarray
    integrand: str = "4 y^a |grad_H u|^2 (x1^2 + x2^2 + y^2)"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if np.any(np.diff(self.tau) <= 0):
            raise GeometryError("profile radii must increase")

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.eta) >= -1e-12 * max(1.0, np.abs(self.eta).max())))


def energy_density(u: ScalarField, rule: BallRule) -> np.ndarray:
    """4 |grad_H u|^2 (x1^2 + x2^2 + y^2) at the cell nodes (y^a is in the weights)."""
    pts = rule.cells.points()
    if isinstance(u, GridField):
        xu, yu, _, _ = grid_cell_gradient(u, rule.cells)
    else:
        xu, yu = X(u)(pts), Y(u)(pts)
    return 4 * (xu ** 2 + yu ** 2) * (pts[..., 0] ** 2 + pts[..., 1] ** 2 + pts[..., 3] ** 2)


def weighted_energy(u: ScalarField, a: float, tau_list, grid: TensorGrid | None = None) -> EnergyProfile:
    g = u.grid if isinstance(u, GridField) else grid
    if g is None:
        raise GeometryError("closed-form u needs a quadrature grid")
    rule = BallRule(g, a)
    tau = np.asarray(tau_list, dtype=float)
    rule.check(tau)
    dens = energy_density(u, rule)
    eta = np.array([rule.integrate(dens, t) for t in tau])
    return EnergyProfile(tau, eta, meta={"a": a, "grid_shape": list(g.shape), "max_tau": rule.max_tau})


# ----------------------------------------------------------------------------- radial integrals

def _interp_powerlaw(tau, eta, t):
    """Piecewise power-law (log-log) interpolation, linear where eta vanishes."""
    i = np.clip(np.searchsorted(tau, t) - 1, 0, tau.size - 2)
    t0, t1, e0, e1 = tau[i], tau[i + 1], eta[i], eta[i + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.log(e1 / e0) / np.log(t1 / t0)
        pw = e0 * (t / t0) ** p
        lin = e0 + (e1 - e0) * (t - t0) / (t1 - t0)
    return np.where((e0 > 0) & (e1 > 0), pw, lin)


def radial_integral(tau, eta, lo: float, hi: float, k: float) -> float:
    """int_lo^hi eta(t) t^-k dt, exact when eta is a power law on each sample interval."""
    tau = np.asarray(tau, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tol = 1e-12 * hi
    if lo < tau[0] - tol or hi > tau[-1] + tol:
        raise CoverageError(f"profile covers [{tau[0]:.4g}, {tau[-1]:.4g}], need [{lo:.4g}, {hi:.4g}]")
    lo, hi = max(lo, tau[0]), min(hi, tau[-1])
    pts = np.unique(np.concatenate([[lo, hi], tau[(tau > lo) & (tau < hi)]]))
    ev = _interp_powerlaw(tau, eta, pts)
    total = 0.0
    z, w = np.polynomial.legendre.leggauss(8)
    for t0, t1, e0, e1 in zip(pts[:-1], pts[1:], ev[:-1], ev[1:]):
        if e0 > 0 and e1 > 0:
            p = np.log(e1 / e0) / np.log(t1 / t0)
            e = p - k + 1
            c = e0 * t0 ** (-p)
            total += c * (np.log(t1 / t0) if abs(e) < 1e-12 else (t1 ** e - t0 ** e) / e)
        else:
            tt = (z + 1) / 2 * (t1 - t0) + t0
            ee = e0 + (e1 - e0) * (tt - t0) / (t1 - t0)
            total += (t1 - t0) / 2 * np.sum(w * ee * tt ** (-k))
    return float(total)


# ----------------------------------------------------------------------------- radial bound

@dataclass
class Lemma5Result:
    lhs: float
    rhs: float
    error_estimate: float
    eta_r: float
    c5: float | None = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 3 * self.error_estimate


def lemma5_bound(g, r: float, R: float, q: float, grid: TensorGrid, a: float = 0.0, n_tau: int = 96) -> Lemma5Result:
    """lhs = int_{A_{r,R}} g / |Z|^q, rhs = q int_r^R eta / tau^(q+1) + eta(R) / R^q.

    ``g`` is a nonnegative field or an array on the cell nodes; the y^a factor
    (if ``a != 0``) is part of the weights.  ``eta`` is integrated on a
    geometric ladder of ``n_tau`` radii.
    """
    if not 0 < r < R:
        raise GeometryError("need 0 < r < R")
    if not q > 0:
        raise GeometryError("need q > 0")
    rule = BallRule(grid, a)
    rule.check(R)
    gc = _cell_values(g, rule)
    if np.any(gc < 0):
        raise GeometryError("g must be nonnegative")
    wz = rule.cells.weights * gc * rule.center_norm ** (-q)
    lhs = float(np.sum(wz * (rule.fraction(R) - rule.fraction(r))))
    tau = np.geomspace(r, R, n_tau)
    eta = np.array([rule.integrate(gc, t) for t in tau])
    rhs = q * radial_integral(tau, eta, r, R, q + 1) + eta[-1] / R ** q
    # error estimate: fractional cells against the cell-centre indicator rule,
    # plus the change when the radius ladder is halved
    ind = lambda t: (rule.center_norm < t).astype(float)  # noqa: E731
    lhs_ind = float(np.sum(wz * (ind(R) - ind(r))))
    eta_R_ind = float(np.sum(rule.cells.weights * gc * ind(R)))
    err = abs(lhs - lhs_ind) + abs(eta[-1] - eta_R_ind) / R ** q
    coarse = q * radial_integral(tau[::2], eta[::2], r, tau[::2][-1], q + 1)
    if tau[::2][-1] == R:
        err += abs(coarse - q * radial_integral(tau, eta, r, R, q + 1))
    return Lemma5Result(lhs, float(rhs), err, float(eta[0]))


def c5_quadrature() -> float:
    """|B(0,1) cap {y > 0}| from a 1-D integral over the gauge radius.

    The gauge ball {|x|_g < rho} has volume (pi^2 / 2) rho^4, and the slice of
    the unit ball above it has height sqrt(1 - rho^2).
    """
    val, _ = integrate.quad(lambda rho: 2 * np.pi ** 2 * rho ** 3 * np.sqrt(1 - rho * rho), 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13)
    return float(val)


def half_ball_volume(grid: TensorGrid, radius: float = 1.0) -> float:
    """|B(0, radius) cap {y > 0}| by the ball rule (exactly 4 pi^2 / 15 radius^5 in the continuum)."""
    rule = BallRule(grid, 0.0)
    return rule.integrate(np.ones(rule.cells.weights.shape), radius)


# ----------------------------------------------------------------------------- capacity cutoff

def _check_R(R):
    if not R > 1:
        raise GeometryError("capacity cutoff needs R > 1")


def capacity_cutoff(Z, R: float):
    """1 for |Z| <= sqrt R, 2 log(R/|Z|)/log R on the annulus, 0 for |Z| >= R."""
    _check_R(R)
    n = _z_norm(Z)
    out = np.clip(2 * np.log(R / np.maximum(n, 1e-300)) / np.log(R), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def capacity_gradient_sq(Z, R: float):
    """|grad phi_R|^2 = 4/log^2 R |Z|^-4 (x1^2 + x2^2 + y^2) on the annulus, 0 elsewhere."""
    _check_R(R)
    Z = np.asarray(Z, dtype=float)
    n = np.asarray(_z_norm(Z))
    on = (n > np.sqrt(R)) & (n < R)
    val = 4 / np.log(R) ** 2 * np.where(on, n, 1.0) ** -4.0 * (Z[..., 0] ** 2 + Z[..., 1] ** 2 + Z[..., 3] ** 2)
    out = np.where(on, val, 0.0)
    return float(out) if out.ndim == 0 else out


def capacity_gradient(Z, R: float):
    """Closed-form (X phi, Y phi, d phi/dy) on the annulus."""
    _check_R(R)
    Z = np.asarray(Z, dtype=float)
    x1, x2, x3, y = (Z[..., k] for k in range(4))
    r2 = x1 ** 2 + x2 ** 2
    g2 = np.sqrt(r2 ** 2 + x3 ** 2)
    N = g2 + y ** 2
    on = (np.sqrt(N) > np.sqrt(R)) & (np.sqrt(N) < R)
    with np.errstate(divide="ignore", invalid="ignore"):
        XN = 2 * (r2 * x1 + x2 * x3) / g2
        YN = 2 * (r2 * x2 - x1 * x3) / g2
    c = np.where(on, -1.0 / (np.where(on, N, 1.0) * np.log(R)), 0.0)
    XN, YN = np.where(g2 > 0, XN, 0.0), np.where(g2 > 0, YN, 0.0)
    return tuple(np.where(on, c * d, 0.0) for d in (XN, YN, 2 * y))


class CapacityCutoff(ScalarField):
    """phi_R as a field with its closed-form first derivatives."""

    oracle = "closed-form"

    def __init__(self, R: float, _deriv=None):
        _check_R(R)
        self.R, self.dim, self._deriv = R, 4, _deriv

    def __call__(self, pts):
        pts = self._check_dim(pts)
        if self._deriv is None:
            return capacity_cutoff(pts, self.R)
        gx, gy, gyy = capacity_gradient(pts, self.R)
        return {"X": gx, "Y": gy, "Dy": gyy}[self._deriv]

    def apply(self, coeffs, key=None):
        if self._deriv is not None or key not in ("X", "Y", "Dy"):
            raise NotImplementedError("the cutoff exposes X, Y and d/dy only")
        return CapacityCutoff(self.R, key)


# ----------------------------------------------------------------------------- growth criterion

@dataclass
class CriterionReport:
    R: np.ndarray
    quotient: np.ndarray
    sup_eta_over_R4: float
    trend: str
    criterion_failure: bool
    note: str = "finite-range trend only; no statement about the liminf"


def growth_criterion(profile: EnergyProfile, R_list) -> CriterionReport:
    """q(R) = (int_sqrt(R)^R eta tau^-5 dtau + eta(R) R^-4) / log^2 R."""
    R = np.asarray(R_list, dtype=float)
    if np.any(R <= 1):
        raise GeometryError("need R > 1")
    q = np.array([(radial_integral(profile.tau, profile.eta, np.sqrt(Rk), Rk, 5.0)
                   + float(_interp_powerlaw(profile.tau, profile.eta, np.array([Rk]))[0]) / Rk ** 4) / np.log(Rk) ** 2
                  for Rk in R])
    sel = profile.tau >= 1.0
    sup4 = float(np.max(profile.eta[sel] / profile.tau[sel] ** 4)) if sel.any() else float("nan")
    if R.size < 2:
        trend = "inconclusive"
    else:
        d = np.diff(q)
        tail = d[len(d) // 2:]
        trend = "decreasing" if np.all(tail <= 0) else "increasing" if np.all(tail > 0) else "inconclusive"
    return CriterionReport(R, q, sup4, trend, trend == "increasing")


# ----------------------------------------------------------------------------- geometric inequality

@dataclass
class InequalityReport:
    lhs: float
    rhs_hessian_form: float
    rhs_curvature_form: float
    scale: float
    margin: float
    tnu_v: dict
    diagnostics: dict
    n_nodes: int
    n_regular: int
    eq: str = "eq:1-7"

    def holds(self, rel_tol: float = 1e-3) -> bool:
        return self.margin >= -rel_tol * self.scale

    def as_dict(self) -> dict:
        return {"eq": self.eq, "lhs": self.lhs, "rhs_hessian_form": self.rhs_hessian_form,
                "rhs_curvature_form": self.rhs_curvature_form, "scale": self.scale, "margin": self.margin,
                "forms_difference": abs(self.rhs_hessian_form - self.rhs_curvature_form),
                "tnu_v": self.tnu_v, "diagnostics": self.diagnostics, "n_nodes": self.n_nodes,
                "n_regular": self.n_regular}


def node_weights(grid: TensorGrid, a: float) -> np.ndarray:
    """Trapezoid weights in x times the exact y^a integral over dual y cells."""
    w = None
    for ax in grid.axes[:3]:
        wa = np.zeros_like(ax)
        d = np.diff(ax)
        wa[:-1] += d / 2
        wa[1:] += d / 2
        w = wa if w is None else np.multiply.outer(w, wa)
    return np.multiply.outer(w, y_dual_weights(grid.axes[3], a))


def geometric_inequality_report(u: ScalarField, phi: ScalarField, a: float, eps_grad: float | None = None,
                                grid: TensorGrid | None = None) -> InequalityReport:
    """Both sides of the stability inequality, with the rhs in Hessian and curvature form.

    lhs = int y^a |grad_H u|^2 |grad phi|^2; the rhs integrands
    (|Hu|^2 - <(Hu)^2 nu, nu> - 2 (TYu Xu - TXu Yu)) phi^2 and
    |grad_H u|^2 (h^2 + (p + <Hu v, nu>/|grad_H u|)^2 + 2 <T nu, v>) phi^2 are
    summed over the regular set only.  ``scale`` is
    int y^a (|grad_H u|^2 |grad phi|^2 + |Hu|^2 phi^2).
    """
    g = u.grid if isinstance(u, GridField) else grid
    if g is None:
        raise GeometryError("closed-form u needs a quadrature grid")
    phi = as_field(phi, 4)
    pts = g.points()
    w = node_weights(g, a)
    pv = phi(pts)
    gp = [X(phi)(pts), Y(phi)(pts), Dy(phi)(pts)]
    gp2 = sum(c * c for c in gp)
    supp = (np.abs(pv) > 0) | (gp2 > 0)
    if isinstance(u, GridField):
        lo, hi = T(X(u)).valid_bounds()
        P = pts[supp]
        if np.any(P < lo - 1e-12) or np.any(P > hi + 1e-12):
            raise GeometryError("phi support reaches the finite-difference margin of u")
    P = pts[supp]
    W = w[supp]
    phis, gp2s = pv[supp], gp2[supp]
    G = np.hypot(X(u)(P), Y(u)(P))
    lhs = float(np.sum(W * G ** 2 * gp2s))
    eps = default_eps_grad(u) if eps_grad is None else eps_grad
    reg = G > eps
    t = lemma4_terms(u, P[reg], eps)
    fr = t["frame"]
    Wr, ph2 = W[reg], phis[reg] ** 2
    hess_int = t["hess_sq"] - t["hh_nu_nu"] - 2 * t["comm"]
    Gr = fr.grad_norm
    curv_int = Gr ** 2 * (fr.h ** 2 + (fr.p + t["huv_nu"] / Gr) ** 2 + 2 * t["tnu_v"])
    rhs_h = float(np.sum(Wr * ph2 * hess_int))
    rhs_c = float(np.sum(Wr * ph2 * curv_int))
    scale = float(lhs + np.sum(Wr * ph2 * t["hess_sq"]))
    tn = t["tnu_v"]
    foc = ph2 > 0
    tnu = {"min": float(tn[foc].min()) if foc.any() else 0.0, "max": float(tn[foc].max()) if foc.any() else 0.0,
           "weighted_integral": float(np.sum(Wr * ph2 * tn)),
           "fraction_nonnegative": float(np.mean(tn[foc] >= 0)) if foc.any() else 1.0,
           "hypothesis": "<T nu, v> >= 0"}
    resid_p = fr.p + t["huv_nu"] / Gr
    diag = {"sup_abs_h": float(np.max(np.abs(fr.h[foc]))) if foc.any() else 0.0,
            "sup_abs_p_plus_huv": float(np.max(np.abs(resid_p[foc]))) if foc.any() else 0.0,
            "eps_grad": eps}
    return InequalityReport(lhs, rhs_h, rhs_c, scale, lhs - rhs_h, tnu, diag, int(P.shape[0]), int(reg.sum()))
