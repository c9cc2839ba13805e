"""Degenerate extension problem on a truncated box of H1 x [0, inf).

    div(y^a grad u) = 0 in the box,   -y^a u_y = f(u) on y = 0,

with grad = (X, Y, d/dy).  The discretization is variational: the energy

    E(u) = 1/2 int y^a |grad u|^2 - int_{y=0} F(u),   F' = f,

is approximated by sums of squares of difference quotients.
* X u = u_1 + 2 x2 u_3 lives at the centres of (x1, x3) cells.
* Y u = u_2 - 2 x1 u_3 lives at the centres of (x2, x3) cells.
* u_y lives on y edges.
The y weight is the exact integral of y^a over a cell, so it is never
evaluated at y = 0.  The stationarity condition A u = B f(u) is the discrete
equation with its half-cell flux at the y = 0 face.  Faces without Dirichlet
data carry the natural (homogeneous normal derivative) condition.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pyamg
import scipy.sparse as sps
import scipy.sparse.linalg as spla
import sympy as sp

from .fields import COORD_NAMES, Dy, GridField, ScalarField, SymbolicField, X, Y, T, as_field
from .grids import Box4, GeometryError, TensorGrid


class SolverError(RuntimeError):
    """Non-convergence, divergence or an iterate leaving the invariant region."""


# ----------------------------------------------------------------------------- nonlinearities

@dataclass(frozen=True)
class Nonlinearity:
    name: str
    f: Callable
    fprime: Callable
    F: Callable
    invariant: tuple | None = None


NONLINEARITIES = {
    "allen_cahn": Nonlinearity("allen_cahn", lambda u: u - u ** 3, lambda u: 1 - 3 * u ** 2,
                               lambda u: u ** 2 / 2 - u ** 4 / 4, (-1.0, 1.0)),
    "zero": Nonlinearity("zero", lambda u: 0 * u, lambda u: 0 * u, lambda u: 0 * u),
    "decay": Nonlinearity("decay", lambda u: -u, lambda u: -1 + 0 * u, lambda u: -u ** 2 / 2),
}


def get_nonlinearity(name) -> Nonlinearity:
    if isinstance(name, Nonlinearity):
        return name
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise GeometryError(f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}") from None


# ----------------------------------------------------------------------------- discretization

def y_cell_weights(y: np.ndarray, a: float) -> np.ndarray:
    """m_l = int_{y_l}^{y_l+1} y^a dy."""
    return (y[1:] ** (1 + a) - y[:-1] ** (1 + a)) / (1 + a)


def y_dual_weights(y: np.ndarray, a: float) -> np.ndarray:
    """int of y^a over the dual cell of each y node."""
    mid = np.concatenate([[y[0]], 0.5 * (y[1:] + y[:-1]), [y[-1]]])
    return (mid[1:] ** (1 + a) - mid[:-1] ** (1 + a)) / (1 + a)


def _trap(ax):
    w = np.zeros_like(ax)
    d = np.diff(ax)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def _diff(ax):
    n = ax.size
    h = np.diff(ax)
    return sps.diags([-1 / h, 1 / h], [0, 1], shape=(n - 1, n), format="csr")


def _avg(n):
    return sps.diags([0.5 * np.ones(n - 1), 0.5 * np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def _kron(*ms):
    out = ms[0]
    for m in ms[1:]:
        out = sps.kron(out, m, format="csr")
    return out


FACES = ("x1-", "x1+", "x2-", "x2+", "x3-", "x3+", "y+")


class WeightedForm:
    """Sparse matrices of the discrete energy on a :class:`Box4` grid."""

    def __init__(self, box: Box4, a: float):
        if not isinstance(box, Box4):
            raise GeometryError("the extension problem needs a Box4")
        if box.lower[3] != 0:
            raise GeometryError("the y axis must start at 0")
        self.box, self.a = box, a
        self.axes = box.axes()
        self.grid = TensorGrid(self.axes)
        self.shape = self.grid.shape
        x1, x2, x3, y = self.axes
        n1, n2, n3, ny = self.shape
        I = [sps.identity(n, format="csr") for n in self.shape]
        D = [_diff(ax) for ax in self.axes]
        M = [_avg(n) for n in self.shape]
        W = y_dual_weights(y, a)
        w1, w2, w3 = _trap(x1), _trap(x2), _trap(x3)
        h1, h2, h3 = np.diff(x1), np.diff(x2), np.diff(x3)
        # X u at (x1, x3) cell centres, x2 and y at nodes
        X2 = np.broadcast_to(x2[None, :, None, None], (n1 - 1, n2, n3 - 1, ny)).ravel()
        self.GX = _kron(D[0], I[1], M[2], I[3]) + sps.diags(2 * X2) @ _kron(M[0], I[1], D[2], I[3])
        self.wX = (h1[:, None, None, None] * w2[None, :, None, None] * h3[None, None, :, None] * W[None, None, None, :]).ravel()
        X1 = np.broadcast_to(x1[:, None, None, None], (n1, n2 - 1, n3 - 1, ny)).ravel()
        self.GY = _kron(I[0], D[1], M[2], I[3]) - sps.diags(2 * X1) @ _kron(I[0], M[1], D[2], I[3])
        self.wY = (w1[:, None, None, None] * h2[None, :, None, None] * h3[None, None, :, None] * W[None, None, None, :]).ravel()
        self.Gy = _kron(I[0], I[1], I[2], D[3])
        m = y_cell_weights(y, a)
        self.wy = (w1[:, None, None, None] * w2[None, :, None, None] * w3[None, None, :, None] * m[None, None, None, :]).ravel()
        self.A = (self.GX.T @ sps.diags(self.wX) @ self.GX + self.GY.T @ sps.diags(self.wY) @ self.GY
                  + self.Gy.T @ sps.diags(self.wy) @ self.Gy).tocsr()
        bw = np.zeros(self.shape)
        bw[..., 0] = (w1[:, None, None] * w2[None, :, None] * w3[None, None, :])
        self.b = bw.ravel()                      # boundary quadrature weights (zero off y = 0)
        self.bottom = self.b > 0

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def face_mask(self, faces) -> np.ndarray:
        m = np.zeros(self.shape, bool)
        sl = {"x1-": (0, 0), "x1+": (0, -1), "x2-": (1, 0), "x2+": (1, -1), "x3-": (2, 0), "x3+": (2, -1),
              "y+": (3, -1)}
        for f in faces:
            if f not in sl:
                raise GeometryError(f"unknown face {f!r}")
            ax, i = sl[f]
            idx = [slice(None)] * 4
            idx[ax] = i
            m[tuple(idx)] = True
        return m.ravel()

    def dirichlet_energy(self, u) -> float:
        return 0.5 * float(u @ (self.A @ u))

    def energy(self, u, nl: Nonlinearity) -> float:
        return self.dirichlet_energy(u) - float(self.b @ nl.F(u))

    def gradient(self, u, nl: Nonlinearity) -> np.ndarray:
        return self.A @ u - self.b * nl.f(u)

    def quadratic(self, u, xi, nl: Nonlinearity) -> float:
        """Discrete second variation xi^T (A - B f'(u)) xi."""
        return float(xi @ (self.A @ xi) - self.b @ (nl.fprime(u) * xi * xi))


# ----------------------------------------------------------------------------- problem

def _expr_field(text: str, dim: int = 4) -> SymbolicField:
    return SymbolicField(text, dim)


@dataclass
class ExtensionProblem:
    box: Box4
    s: float = 0.5
    nonlinearity: str = "allen_cahn"
    boundary: str = "dirichlet"            # "dirichlet" on ``faces`` or "neumann" everywhere
    faces: tuple = ("x1-", "x1+", "x2-", "x2+", "x3-", "x3+", "y+")
    boundary_data: str | None = None       # expression in x1, x2, x3, y
    tol: float = 1e-9
    max_iter: int = 200
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise GeometryError("need 0 < s < 1 (so that -1 < a < 1)")
        if self.boundary not in ("dirichlet", "neumann"):
            raise GeometryError("boundary must be 'dirichlet' or 'neumann'")
        get_nonlinearity(self.nonlinearity)

    @property
    def a(self) -> float:
        return 1 - 2 * self.s

    def data_field(self) -> ScalarField | None:
        return None if self.boundary_data is None else _expr_field(self.boundary_data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["box"] = {"lower": list(self.box.lower), "upper": list(self.box.upper), "counts": list(self.box.counts),
                    "y_ratio": self.box.y_ratio}
        d["faces"] = list(self.faces)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExtensionProblem":
        d = dict(d)
        b = d.pop("box")
        box = Box4(tuple(b["lower"]), tuple(b["upper"]), tuple(b["counts"]), y_ratio=float(b.get("y_ratio", 1.0)))
        if "a" in d and "s" not in d:
            d["s"] = (1 - float(d.pop("a"))) / 2
        d.pop("a", None)
        if "faces" in d:
            d["faces"] = tuple(d["faces"])
        return cls(box=box, **d)

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "ExtensionProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = float("nan")
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    method: str = ""
    linear_iterations: int = 0


class _System:
    """Free/fixed node split plus an AMG preconditioner for A + sigma B on free nodes."""

    def __init__(self, form: WeightedForm, fixed: np.ndarray, sigma: float, tol: float):
        self.form, self.fixed, self.free = form, fixed, ~fixed
        self.tol = tol
        Aff = form.A[self.free][:, self.free]
        self.Aff = Aff.tocsr()
        self.Afd = form.A[self.free][:, fixed].tocsr()
        self.bf = form.b[self.free]
        self.P = (Aff + sps.diags(sigma * self.bf)).tocsr()
        self.ml = pyamg.smoothed_aggregation_solver(self.P, symmetry="symmetric", max_coarse=500)
        self.M = self.ml.aspreconditioner(cycle="V")
        self.iters = 0

    def solve_P(self, rhs, x0=None):
        count = [0]

        def cb(_):
            count[0] += 1
        sol, info = spla.cg(self.P, rhs, x0=x0, rtol=self.tol, atol=0.0, M=self.M, maxiter=500, callback=cb)
        self.iters += count[0]
        if info != 0:
            raise SolverError(f"preconditioned CG did not converge (info={info})")
        return sol


def _initial_vector(form, problem, initial):
    if initial is None:
        data = problem.data_field()
        return np.zeros(form.size) if data is None else data(form.grid.points()).ravel()
    if isinstance(initial, GridField):
        return initial.values.ravel().copy()
    if callable(initial):
        return np.asarray(initial(form.grid.points()), dtype=float).ravel()
    return np.broadcast_to(np.asarray(initial, dtype=float), form.shape).ravel().copy()


def _fixed_setup(form, problem, u, boundary_values=None):
    if problem.boundary == "neumann":
        return np.zeros(form.size, bool)
    fixed = form.face_mask(problem.faces)
    if boundary_values is not None:
        u[fixed] = np.asarray(boundary_values, dtype=float).ravel()[fixed]
    else:
        data = problem.data_field()
        if data is None:
            raise GeometryError("Dirichlet faces need boundary_data")
        u[fixed] = data(form.grid.points().reshape(-1, 4)[fixed])
    return fixed


def _as_grid_field(form, u) -> GridField:
    return GridField(u.reshape(form.shape), form.grid)


def _check_region(u, nl, tol=5e-2):
    if nl.invariant is not None:
        lo, hi = nl.invariant
        if u.min() < lo - tol or u.max() > hi + tol:
            raise SolverError(f"iterate left the invariant region [{lo}, {hi}] (range {u.min():.3f}..{u.max():.3f})")


def solve_linear_extension(trace, a: float, box: Box4, boundary_values=None, tol: float = 1e-10,
                           faces=FACES, lift_engine=None) -> GridField:
    """Dirichlet data ``trace`` at y = 0 and ``boundary_values`` (or the Poisson lift) on ``faces``."""
    form = WeightedForm(box, a)
    pts = form.grid.points().reshape(-1, 4)
    v = as_field(trace)
    fixed = form.face_mask(faces) | form.bottom
    u = np.zeros(form.size)
    bnd = form.face_mask(faces) & ~form.bottom
    if boundary_values is None:
        from .kernels import PoissonLift
        from .grids import PolarQuadrature
        eng = lift_engine or PoissonLift((1 - a) / 2, PolarQuadrature(1e-3, 1e4, 64, 12, 12))
        u[bnd] = eng.extension_field(v)(pts[bnd])
    elif callable(boundary_values):
        u[bnd] = boundary_values(pts[bnd])
    else:
        u[bnd] = np.asarray(boundary_values, float).ravel()[bnd]
    u[form.bottom] = v(pts[form.bottom][:, :3])
    free = ~fixed
    Aff = form.A[free][:, free].tocsr()
    rhs = -form.A[free][:, fixed] @ u[fixed]
    ml = pyamg.smoothed_aggregation_solver(Aff, symmetry="symmetric", max_coarse=500)
    sol, info = spla.cg(Aff, rhs, rtol=tol, atol=0.0, M=ml.aspreconditioner(), maxiter=1000)
    if info != 0:
        raise SolverError("linear extension solve did not converge")
    u[free] = sol
    return _as_grid_field(form, u)


def solve_neumann_reaction(problem: ExtensionProblem, initial=None, boundary_values=None,
                           return_info: bool = False):
    """Damped Newton on A u = B f(u) with Picard (relaxation 0.5) as fallback."""
    nl = get_nonlinearity(problem.nonlinearity)
    form = WeightedForm(problem.box, problem.a)
    u = _initial_vector(form, problem, initial)
    fixed = _fixed_setup(form, problem, u, boundary_values)
    _check_region(u, nl)
    sigma = 1.0 + max(0.0, float(np.max(nl.fprime(np.linspace(-1.5, 1.5, 61)))))
    sysm = _System(form, fixed, sigma, min(1e-3, problem.tol))
    free = sysm.free
    info = SolveInfo(method="newton")

    def resid(uu):
        return (form.A @ uu - form.b * nl.f(uu))[free]

    r = resid(u)
    scale = max(np.linalg.norm(form.b), 1e-300)
    for it in range(problem.max_iter):
        rn = np.linalg.norm(r) / scale
        info.residual_trace.append(rn)
        if rn < problem.tol:
            break
        J = (sysm.Aff - sps.diags(sysm.bf * nl.fprime(u[free]))).tocsr()
        step, ok = spla.gmres(J, -r, rtol=1e-8, atol=0.0, M=sysm.M, restart=50, maxiter=20)
        accepted = False
        if ok == 0:
            lam = 1.0
            for _ in range(8):
                trial = u.copy()
                trial[free] += lam * step
                rt = resid(trial)
                if np.linalg.norm(rt) < (1 - 1e-4 * lam) * np.linalg.norm(r):
                    u, r, accepted = trial, rt, True
                    break
                lam *= 0.5
        if not accepted:
            info.method = "newton+picard"
            rhs = sysm.bf * (nl.f(u[free]) + sigma * u[free]) - sysm.Afd @ u[fixed]
            target = sysm.solve_P(rhs, u[free])
            u[free] += 0.5 * (target - u[free])
            r = resid(u)
        _check_region(u, nl)
        info.iterations = it + 1
    else:
        raise SolverError(f"nonlinear solve stalled at residual {np.linalg.norm(r) / scale:.2e}")
    info.residual = float(np.linalg.norm(r) / scale)
    info.linear_iterations = sysm.iters
    field_ = _as_grid_field(form, u)
    return (field_, info) if return_info else field_


def energy_descent(problem: ExtensionProblem, initial=None, boundary_values=None, return_info: bool = False,
                   polish: bool = True):
    """Preconditioned gradient descent on the discrete energy with Armijo backtracking.

    The preconditioner A + sigma B (sigma >= max f') majorizes the energy
    Hessian, so the full step is a descent step; the line search makes the
    energy trace monotone by construction.  ``polish`` finishes with Newton
    from the descent iterate (the energy is re-checked afterwards).
    """
    nl = get_nonlinearity(problem.nonlinearity)
    form = WeightedForm(problem.box, problem.a)
    u = _initial_vector(form, problem, initial)
    fixed = _fixed_setup(form, problem, u, boundary_values)
    sigma = 1.0 + max(0.0, float(np.max(nl.fprime(np.linspace(-1.5, 1.5, 61)))))
    sysm = _System(form, fixed, sigma, 1e-6)
    free = sysm.free
    info = SolveInfo(method="descent")
    E = form.energy(u, nl)
    info.energy_trace.append(E)
    scale = max(np.linalg.norm(form.b), 1e-300)
    # with a Newton polish, descent only has to select the basin
    do_polish = polish and problem.tol < 1e-7
    stop = max(problem.tol, 1e-5) if do_polish else problem.tol
    for it in range(problem.max_iter):
        g = form.gradient(u, nl)[free]
        gn = np.linalg.norm(g) / scale
        info.residual_trace.append(gn)
        if gn < stop:
            break
        d = -sysm.solve_P(g)
        slope = float(g @ d)
        lam = 1.0
        while True:
            trial = u.copy()
            trial[free] += lam * d
            Et = form.energy(trial, nl)
            if Et <= E + 1e-4 * lam * slope:
                break
            lam *= 0.5
            if lam < 1e-10:
                raise SolverError("energy increase: line search failed")
        u, E = trial, Et
        info.energy_trace.append(E)
        info.iterations = it + 1
    else:
        raise SolverError("energy descent exhausted its iteration budget")
    if do_polish:
        sub = ExtensionProblem(**{**problem.__dict__, "max_iter": 30})
        polished, pinfo = solve_neumann_reaction(sub, GridField(u.reshape(form.shape), form.grid),
                                                 boundary_values=u if problem.boundary == "dirichlet" else None,
                                                 return_info=True)
        Ep = form.energy(polished.values.ravel(), nl)
        if Ep <= E + 1e-9 * max(1.0, abs(E)):
            u, E = polished.values.ravel(), Ep
            info.energy_trace.append(E)
            info.residual = pinfo.residual
            info.method = "descent+newton"
        else:
            info.residual = info.residual_trace[-1]
    else:
        info.residual = info.residual_trace[-1]
    info.linear_iterations = sysm.iters
    field_ = _as_grid_field(form, u)
    return (field_, info) if return_info else field_


# ----------------------------------------------------------------------------- test functions

class CompactBump(SymbolicField):
    """(1 - q)^k P(Z) on {q < 1}, q = sum ((Z_i - c_i)/rho_i)^2, zero outside.

    Derivatives up to order k - 1 vanish on {q = 1}, so derivative fields keep
    the same support and the mask stays exact.
    """

    def __init__(self, center, radii, k: int = 6, poly=1, dim: int = 4, _expr=None):
        self.center = tuple(float(c) for c in center)
        self.radii = tuple(float(r) for r in radii)
        self.k = k
        syms = sp.symbols(COORD_NAMES[:dim], real=True)
        self.q_expr = sum(((s - sp.nsimplify(c)) / sp.nsimplify(r)) ** 2 for s, c, r in zip(syms, self.center, self.radii))
        expr = _expr if _expr is not None else (1 - self.q_expr) ** k * sp.sympify(poly)
        super().__init__(expr, dim)

    def q(self, pts):
        pts = np.asarray(pts, dtype=float)
        return sum(((pts[..., i] - c) / r) ** 2 for i, (c, r) in enumerate(zip(self.center, self.radii)))

    def __call__(self, pts):
        return np.where(self.q(pts) < 1, super().__call__(pts), 0.0)

    def _apply(self, coeffs):
        base = SymbolicField._apply(self, coeffs)
        return CompactBump(self.center, self.radii, self.k, dim=self.dim, _expr=base.expr)

    def support_box(self):
        lo = np.array(self.center) - np.array(self.radii)
        hi = np.array(self.center) + np.array(self.radii)
        return lo, hi


class BumpDirection(ScalarField):
    """Random smooth compactly supported direction with analytic first derivatives.

    xi = (1 - q)^k_+ (c0 + c . (Z - center)), evaluated with numpy only.
    """

    oracle = "closed-form"

    def __init__(self, center, radii, coef, k: int = 4, _deriv=None):
        self.dim = 4
        self.center = np.asarray(center, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        self.coef = np.asarray(coef, dtype=float)
        self.k = k
        self._deriv = _deriv               # None for the value, else tuple of (axis, coefficient)

    def _parts(self, pts):
        d = (pts - self.center) / self.radii
        q = np.sum(d * d, axis=-1)
        inside = q < 1
        base = np.where(inside, 1 - q, 0.0)
        poly = self.coef[0] + (pts - self.center) @ self.coef[1:]
        return d, base, poly, inside

    def euclidean_gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        d, base, poly, inside = self._parts(pts)
        k = self.k
        dq = 2 * d / self.radii
        g = (-k * base[..., None] ** (k - 1) * dq * poly[..., None] + base[..., None] ** k * self.coef[1:])
        return np.where(inside[..., None], g, 0.0)

    def __call__(self, pts):
        pts = self._check_dim(pts)
        if self._deriv is None:
            _, base, poly, _ = self._parts(pts)
            return base ** self.k * poly
        g = self.euclidean_gradient(pts)
        c = [pts[..., i] for i in range(4)]
        return sum(np.asarray(cf(c), dtype=float) * g[..., ax] for ax, cf in self._deriv)

    def _apply(self, coeffs):
        if self._deriv is not None:
            raise NotImplementedError("random directions provide first derivatives only")
        return BumpDirection(self.center, self.radii, self.coef, self.k, tuple(coeffs))

    def support_box(self):
        return self.center - self.radii, self.center + self.radii


def random_direction(box: Box4, rng, margin: float = 0.15, touch_bottom: bool = True) -> BumpDirection:
    lo = np.asarray(box.lower, dtype=float)
    hi = np.asarray(box.upper, dtype=float)
    ext = hi - lo
    radii = ext * rng.uniform(0.15, 0.35, 4)
    c_lo = lo + margin * ext + radii
    c_hi = hi - margin * ext - radii
    c_lo[3] = 0.0 if touch_bottom else c_lo[3]
    c_hi = np.maximum(c_hi, c_lo)
    center = rng.uniform(c_lo, c_hi)
    if touch_bottom:
        center[3] = rng.uniform(0.0, 0.5 * radii[3])
    coef = np.concatenate([[1.0], rng.normal(0, 1, 4) / radii])
    return BumpDirection(center, radii, coef)


# ----------------------------------------------------------------------------- quadrature

class CellQuadrature:
    """Cell-centred rule on a Box4 tensor grid, weighting y^a exactly per cell.

    The y node of each cell is the y^a-weighted centroid, which makes the rule
    second order for y^a times a smooth function even when a != 0.
    """

    def __init__(self, grid: TensorGrid, a: float):
        self.grid, self.a = grid, a
        x1, x2, x3, y = grid.axes
        cy = ((y[1:] ** (2 + a) - y[:-1] ** (2 + a)) / (2 + a)) / y_cell_weights(y, a)
        self.centers = TensorGrid((0.5 * (x1[1:] + x1[:-1]), 0.5 * (x2[1:] + x2[:-1]), 0.5 * (x3[1:] + x3[:-1]), cy))
        hx = [np.diff(ax) for ax in (x1, x2, x3)]
        self.weights = (hx[0][:, None, None, None] * hx[1][None, :, None, None] * hx[2][None, None, :, None]
                        * y_cell_weights(y, a)[None, None, None, :])
        self.bottom_weights = (_trap(x1)[:, None, None] * _trap(x2)[None, :, None] * _trap(x3)[None, None, :])
        self.bottom_points = grid.points()[..., 0, :]

    def points(self):
        return self.centers.points()

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))

    def integrate_bottom(self, values) -> float:
        return float(np.sum(self.bottom_weights * values))


def grid_cell_gradient(u: GridField, quad: CellQuadrature):
    """(Xu, Yu, u_y) of the multilinear interpolant at the quadrature centres."""
    v = u.values
    x1, x2, x3, y = u.grid.axes
    cen = quad.points()
    ty = (quad.centers.axes[3] - y[:-1]) / np.diff(y)

    def avg(arr, skip):
        out = arr
        for ax in range(3):
            if ax != skip:
                sl0 = [slice(None)] * 4
                sl1 = [slice(None)] * 4
                sl0[ax], sl1[ax] = slice(None, -1), slice(1, None)
                out = 0.5 * (out[tuple(sl0)] + out[tuple(sl1)])
        return out

    def yint(arr):
        return arr[..., :-1] * (1 - ty) + arr[..., 1:] * ty

    def dx(ax):
        sl0 = [slice(None)] * 4
        sl1 = [slice(None)] * 4
        sl0[ax], sl1[ax] = slice(None, -1), slice(1, None)
        h = np.diff(u.grid.axes[ax]).reshape([-1 if i == ax else 1 for i in range(4)])
        return yint(avg((v[tuple(sl1)] - v[tuple(sl0)]) / h, ax))

    d1, d2, d3 = dx(0), dx(1), dx(2)
    dy = avg((v[..., 1:] - v[..., :-1]) / np.diff(y), -1)
    Xu = d1 + 2 * cen[..., 1] * d3
    Yu = d2 - 2 * cen[..., 0] * d3
    uc = yint(avg(v, -1))
    return Xu, Yu, dy, uc


def _grad_of(field_: ScalarField, pts):
    return X(field_)(pts), Y(field_)(pts), Dy(field_)(pts)


def _check_aligned(u: ScalarField, xi: ScalarField):
    if isinstance(u, GridField) and isinstance(xi, GridField):
        if u.grid.shape != xi.grid.shape or any(not np.array_equal(p, q) for p, q in zip(u.grid.axes, xi.grid.axes)):
            raise GeometryError("misaligned grids: u and xi must share a grid")


def _fields_on_cells(u, quad):
    if isinstance(u, GridField):
        return grid_cell_gradient(u, quad)
    pts = quad.points()
    xu, yu, uy = _grad_of(u, pts)
    return xu, yu, uy, u(pts)


def _bottom_values(u, quad):
    if isinstance(u, GridField):
        return u.values[..., 0]
    return u(quad.bottom_points)


def weak_residual_terms(u: ScalarField, xi: ScalarField, a: float, f, grid: TensorGrid | None = None) -> dict:
    """Bulk and boundary pieces of the weak residual on a cell-centred rule."""
    nl = get_nonlinearity(f) if isinstance(f, (str, Nonlinearity)) else Nonlinearity("user", f, None, None)
    xi = as_field(xi, 4)
    _check_aligned(u, xi)
    g = u.grid if isinstance(u, GridField) else grid
    if g is None:
        raise GeometryError("closed-form u needs an explicit quadrature grid")
    quad = CellQuadrature(g, a)
    pts = quad.points()
    xu, yu, uy, _ = _fields_on_cells(u, quad)
    xx, xy, xyy = _grad_of(xi, pts)
    bulk = quad.integrate(xu * xx + yu * xy + uy * xyy)
    ub = _bottom_values(u, quad)
    bnd = quad.integrate_bottom(nl.f(ub) * xi(quad.bottom_points))
    scale = np.sqrt(quad.integrate(xu ** 2 + yu ** 2 + uy ** 2) * quad.integrate(xx ** 2 + xy ** 2 + xyy ** 2))
    return {"bulk": bulk, "boundary": bnd, "residual": bulk - bnd, "scale": float(scale)}


def weak_residual(u: ScalarField, xi: ScalarField, a: float, f="allen_cahn", grid: TensorGrid | None = None) -> float:
    """int y^a <grad u, grad xi> - int_{y=0} f(u) xi."""
    return weak_residual_terms(u, xi, a, f, grid)["residual"]


def stability_form(u: ScalarField, xi: ScalarField, a: float, fprime, grid: TensorGrid | None = None,
                   return_norm: bool = False):
    """Q(xi) = int y^a |grad xi|^2 - int_{y=0} f'(u) xi^2."""
    fp = get_nonlinearity(fprime).fprime if isinstance(fprime, (str, Nonlinearity)) else fprime
    xi = as_field(xi, 4)
    _check_aligned(u, xi)
    g = u.grid if isinstance(u, GridField) else grid
    if g is None:
        raise GeometryError("closed-form u needs an explicit quadrature grid")
    quad = CellQuadrature(g, a)
    pts = quad.points()
    gx = _grad_of(xi, pts)
    dir_ = quad.integrate(sum(c * c for c in gx))
    xb = xi(quad.bottom_points)
    ub = _bottom_values(u, quad)
    Q = dir_ - quad.integrate_bottom(fp(ub) * xb * xb)
    norm = dir_ + quad.integrate_bottom(xb * xb)
    return (Q, norm) if return_norm else Q


@dataclass
class StabilityReport:
    n_directions: int
    seed: int
    min_Q: float
    min_normalized: float
    failing_direction: dict | None
    values: list = field(repr=False, default_factory=list)

    @property
    def stable(self) -> bool:
        return self.failing_direction is None


def stability_scan(u: ScalarField, a: float, fprime, n_directions: int = 200, seed: int = 0,
                   tol: float = 1e-6, grid: TensorGrid | None = None, box: Box4 | None = None) -> StabilityReport:
    """Q over random smooth compactly supported directions (reproducible from ``seed``)."""
    g = u.grid if isinstance(u, GridField) else grid
    if box is None:
        box = Box4(tuple(g.lower), tuple(g.upper), g.shape)
    rng = np.random.default_rng(seed)
    vals, worst, worst_n, fail = [], np.inf, np.inf, None
    for i in range(n_directions):
        d = random_direction(box, rng)
        Q, n = stability_form(u, d, a, fprime, grid=g, return_norm=True)
        vals.append(Q / n)
        if Q / n < worst_n:
            worst_n, worst = Q / n, Q
            if Q < -tol * n:
                fail = {"index": i, "center": d.center.tolist(), "radii": d.radii.tolist(), "coef": d.coef.tolist(),
                        "Q": Q, "norm": n}
    return StabilityReport(n_directions, seed, float(worst), float(worst_n), fail, vals)


# ----------------------------------------------------------------------------- integration by parts

def lemma3_identities(u: ScalarField, xi: ScalarField, a: float, grid: TensorGrid) -> dict:
    """Both sides of the two integration-by-parts identities on a cell rule.

    X: int y^a <grad u, grad(X xi)> = int y^a (-<grad(X u), grad xi> + 2 TYu xi)
    Y: int y^a <grad u, grad(Y xi)> = int y^a (-<grad(Y u), grad xi> - 2 TXu xi)
    """
    quad = CellQuadrature(grid, a)
    pts = quad.points()
    gu = _grad_of(u, pts)
    gxi = _grad_of(xi, pts)
    xiv = xi(pts)
    out = {}
    for name, op, tsign, tfield in (("X", X, 2.0, T(Y(u))), ("Y", Y, -2.0, T(X(u)))):
        lhs = quad.integrate(sum(p * q for p, q in zip(gu, _grad_of(op(xi), pts))))
        rhs = quad.integrate(-sum(p * q for p, q in zip(_grad_of(op(u), pts), gxi)) + tsign * tfield(pts) * xiv)
        out[name] = (lhs, rhs)
    return out


def interior_hessian_energy(u: GridField, a: float, inner_box) -> float:
    """int y^a (|grad(Xu)|^2 + |grad(Yu)|^2) over ``inner_box`` (a diagnostic)."""
    lo, hi = (np.asarray(b, float) for b in inner_box)
    total = 0.0
    quad = CellQuadrature(u.grid, a)
    inside = np.all((quad.points() >= lo) & (quad.points() <= hi), axis=-1)
    for d in (X(u), Y(u)):
        gf = GridField(d.values, u.grid, np.zeros((4, 2), int))
        gx, gy, gyy, _ = grid_cell_gradient(gf, quad)
        total += quad.integrate(np.where(inside, gx ** 2 + gy ** 2 + gyy ** 2, 0.0))
    return total
