"""Heat, Poisson and Riesz kernels, the fractional sub-Laplacian and the
Dirichlet-to-Neumann check.

Heat kernel
-----------
h(t, x) = t^-2 H(alpha, beta) with alpha = r^2/(4t), beta = x3/(4t), r^2 = x1^2 + x2^2 and

    H(alpha, beta) = (16 pi^2)^-1 int_0^inf cos(beta mu) (mu / sinh mu) exp(-alpha mu coth mu) dmu,

the fundamental solution of d/dt - (X^2 + Y^2) (partial Fourier transform in
x3 plus Mehler's formula).  H * e^alpha is tabulated once on an (alpha, beta)
grid and interpolated by a bicubic spline of its logarithm; the homogeneity
r^4 h(r^2 t, delta_r x) = h(t, x) is therefore built in.  :func:`heat_flow_fd`
integrates the heat equation on a grid as an independent cross-check.

Everything else is a t-integral against h, evaluated in log t with analytic
tail bounds based on 0 <= h(t, x) <= h(t, 0) = 1 / (64 t^2).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RectBivariateSpline
from scipy.special import gamma, gammaincc, roots_jacobi

from .fields import ClosureField, ScalarField, X, Y, as_field
from .grids import Box3, GeometryError, PolarQuadrature, Quadrature, gauge_sphere_angles, sphere_point
from .group import TruncationError, dilate, gauge_norm, group_convolve, group_mul

H0 = 1.0 / 64.0  # h(t, 0) t^2


class KernelError(GeometryError):
    """Invalid kernel parameters or insufficient quadrature coverage."""


class InstabilityError(RuntimeError):
    """The explicit heat-flow integrator blew up."""


def _composite_gl(edges, m):
    z, w = leggauss(m)
    a, b = np.asarray(edges[:-1])[:, None], np.asarray(edges[1:])[:, None]
    return ((z + 1) / 2 * (b - a) + a).ravel(), (w / 2 * (b - a)).ravel()


class HeatKernel:
    """Tabulated evaluator of h(t, x); immutable after construction."""

    ALPHA_MAX = 80.0
    BETA_MAX = 60.0

    def __init__(self, n_alpha_near: int = 201, n_alpha_far: int = 391, n_beta: int = 1201, mu_nodes: int = 16):
        edges = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 12), np.linspace(1.0, 50.0, 197)[1:]])
        self.mu, self.mu_w = _composite_gl(edges, mu_nodes)
        self.alpha = np.concatenate([np.linspace(0, 2, n_alpha_near), np.linspace(2, self.ALPHA_MAX, n_alpha_far)[1:]])
        self.beta = np.linspace(0, self.BETA_MAX, n_beta)
        Hs = self.direct_scaled(self.alpha, self.beta, outer=True)
        ok = Hs > 1e-12 * Hs[:, :1]
        # last reliable beta per alpha row; beyond it H is set to 0
        first_bad = np.where(ok.all(axis=1), n_beta, np.argmin(ok, axis=1))
        self.beta_star = self.beta[np.maximum(first_bad - 1, 0)]
        L = np.log(np.where(ok, Hs, 1.0))
        for i, j0 in enumerate(first_bad):
            if j0 < n_beta:
                slope = (L[i, j0 - 1] - L[i, j0 - 6]) / 5
                L[i, j0:] = L[i, j0 - 1] + slope * np.arange(1, n_beta - j0 + 1)
        self._spline = RectBivariateSpline(self.alpha, self.beta, L, kx=3, ky=3)

    def direct_scaled(self, alpha, beta, outer: bool = False):
        """H e^alpha by direct quadrature in mu (pairwise or on the outer grid)."""
        g = self.mu / np.sinh(self.mu)
        c = self.mu / np.tanh(self.mu) - 1.0
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if outer:
            E = np.exp(-np.outer(alpha, c))
            return (E * (g * self.mu_w)) @ np.cos(np.outer(self.mu, beta)) / (16 * np.pi ** 2)
        a, b = np.broadcast_arrays(alpha, beta)
        out = np.empty(a.shape)
        fa, fb, fo = a.ravel(), b.ravel(), out.reshape(-1)
        for i in range(0, fa.size, 2048):
            sl = slice(i, i + 2048)
            fo[sl] = (np.exp(-np.outer(fa[sl], c)) * np.cos(np.outer(fb[sl], self.mu))) @ (g * self.mu_w)
        return out / (16 * np.pi ** 2)

    def H(self, alpha, beta):
        alpha = np.asarray(alpha, dtype=float)
        beta = np.abs(np.asarray(beta, dtype=float))
        a = np.minimum(alpha, self.ALPHA_MAX)
        b = np.minimum(beta, self.BETA_MAX)
        out = np.exp(self._spline.ev(a, b) - a)
        cut = (alpha > self.ALPHA_MAX) | (beta > np.interp(a, self.alpha, self.beta_star))
        return np.where(cut, 0.0, out)

    def from_invariants(self, t, r2, x3):
        t = np.asarray(t, dtype=float)
        return self.H(r2 / (4 * t), x3 / (4 * t)) / t ** 2

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise KernelError("heat kernel needs t > 0")
        return self.from_invariants(t, x[..., 0] ** 2 + x[..., 1] ** 2, x[..., 2])


@functools.lru_cache(maxsize=1)
def default_heat_kernel() -> HeatKernel:
    return HeatKernel()


def _heat(heat):
    if heat is None:
        return default_heat_kernel()
    if isinstance(heat, HeatKernelTable):
        return heat.evaluator
    return heat


# ----------------------------------------------------------------------------- heat table

@dataclass
class HeatKernelTable:
    t: np.ndarray
    box: Box3
    values: np.ndarray
    mass_defect: np.ndarray
    homogeneity_residual: dict
    evaluator: HeatKernel = field(repr=False)

    def __call__(self, t, x):
        return self.evaluator(t, x)

    def sidecar(self) -> dict:
        return {"t": self.t, "mass_defect": self.mass_defect,
                "homogeneity_residual": {str(k): v for k, v in self.homogeneity_residual.items()},
                "box": {"lower": self.box.lower, "upper": self.box.upper, "counts": self.box.counts}}


def heat_kernel(t_values, box: Box3, config: dict | None = None, heat: HeatKernel | None = None) -> HeatKernelTable:
    """Sample h(t_k, .) on ``box`` and check mass and homogeneity.

    ``config`` keys: ``mass_tol`` (raise :class:`TruncationError` above it,
    default 1e-2) and ``scales`` (dilation factors, default (0.5, 2)).
    """
    cfg = {"mass_tol": 1e-2, "scales": (0.5, 2.0), **(config or {})}
    ev = _heat(heat)
    t = np.asarray(t_values, dtype=float)
    if np.any(t <= 0):
        raise KernelError("time grid must be positive")
    q = box.quadrature()
    pts = q.nodes
    vals = np.stack([ev(tk, pts) for tk in t])
    mass = vals @ q.weights
    defect = np.abs(mass - 1.0)
    if np.any(defect > cfg["mass_tol"]):
        raise TruncationError(f"heat mass defect {defect.max():.2e}: box too small or too coarse for these times")
    resid = {}
    for r in cfg["scales"]:
        big = np.stack([r ** 4 * ev(r * r * tk, dilate(r, pts)) for tk in t])
        resid[float(r)] = float(np.max(np.abs(big - vals)) / np.max(vals))
    return HeatKernelTable(t, box, vals.reshape((t.size,) + tuple(box.counts)), defect, resid, ev)


def semigroup_defect(heat, t: float, s: float, points, box: Box3) -> float:
    """sup |h(t) * h(s) - h(t + s)| / sup h(t + s) at ``points``, convolving on ``box``."""
    ev = _heat(heat)
    q = box.quadrature()
    res = group_convolve(lambda p: ev(t, p), q, ev(s, q.nodes), points, kernel_mass=1.0, truncation_tol=1e-2)
    exact = ev(t + s, np.asarray(points, dtype=float))
    return float(np.max(np.abs(res.value - exact)) / ev(t + s, np.zeros(3)))


def kohn_laplacian_fd(w: np.ndarray, axes) -> np.ndarray:
    """(X^2 + Y^2) w on interior nodes of a uniform grid (boundary entries 0).

    Uses d11 + d22 + 4 x2 d13 - 4 x1 d23 + 4 r^2 d33 with centred stencils.
    """
    x1, x2, _ = np.meshgrid(*axes, indexing="ij")
    h1, h2, h3 = (a[1] - a[0] for a in axes)
    c = (slice(1, -1),) * 3
    out = np.zeros_like(w)

    def sh(i, j, k):
        return w[1 + i:w.shape[0] - 1 + i, 1 + j:w.shape[1] - 1 + j, 1 + k:w.shape[2] - 1 + k]

    d11 = (sh(1, 0, 0) - 2 * sh(0, 0, 0) + sh(-1, 0, 0)) / h1 ** 2
    d22 = (sh(0, 1, 0) - 2 * sh(0, 0, 0) + sh(0, -1, 0)) / h2 ** 2
    d33 = (sh(0, 0, 1) - 2 * sh(0, 0, 0) + sh(0, 0, -1)) / h3 ** 2
    d13 = (sh(1, 0, 1) - sh(1, 0, -1) - sh(-1, 0, 1) + sh(-1, 0, -1)) / (4 * h1 * h3)
    d23 = (sh(0, 1, 1) - sh(0, 1, -1) - sh(0, -1, 1) + sh(0, -1, -1)) / (4 * h2 * h3)
    X1, X2 = x1[c], x2[c]
    out[c] = d11 + d22 + 4 * X2 * d13 - 4 * X1 * d23 + 4 * (X1 ** 2 + X2 ** 2) * d33
    return out


@dataclass
class HeatFlowResult:
    values: np.ndarray
    reference: np.ndarray
    steps: int
    dt: float
    relative_error: float


def heat_flow_fd(box: Box3, t0: float, t1: float, heat=None, safety: float = 0.9) -> HeatFlowResult:
    """Explicit Euler for dw/dt = (X^2 + Y^2) w from h(t0) to t1.

    Boundary values are taken from the evaluator at each step, so the
    comparison with h(t1) isolates the interior discretization.
    """
    ev = _heat(heat)
    axes = box.axes()
    pts = box.grid().points()
    h1, h2, h3 = box.spacing
    x1, x2 = pts[..., 0], pts[..., 1]
    gersh = 2 * (2 / h1 ** 2 + 2 / h2 ** 2 + 8 * (x1 ** 2 + x2 ** 2) / h3 ** 2
                 + 2 * np.abs(x2) / (h1 * h3) + 2 * np.abs(x1) / (h2 * h3))
    dt_max = 2.0 / gersh.max()
    n = int(np.ceil((t1 - t0) / (safety * dt_max)))
    dt = (t1 - t0) / n
    w = ev(t0, pts)
    scale = np.abs(w).max()
    inner = (slice(1, -1),) * 3
    bmask = np.ones(w.shape, bool)
    bmask[inner] = False
    bpts = pts[bmask]
    t = t0
    for _ in range(n):
        w = w + dt * kohn_laplacian_fd(w, axes)
        t += dt
        w[bmask] = ev(t, bpts)
        if not np.isfinite(w).all() or np.abs(w).max() > 10 * scale:
            raise InstabilityError("explicit heat flow diverged; reduce the time step")
    ref = ev(t1, pts)
    return HeatFlowResult(w, ref, n, dt, float(np.abs(w - ref).max() / ref.max()))


# ----------------------------------------------------------------------------- t-integrals

def _t_integral(ev: HeatKernel, r2, x3, power: float, c: float = 0.0, n: int = 200,
                lo: float = 1 / 400, hi: float = 1e4, tail_tol: float | None = None):
    """int_0^inf t^power e^(-c/t) h(t, x) dt for arrays of (r2, x3).

    Trapezoid in log t over [lo L2, hi L2] with L2 = 4c + |x|_g^2.  Returns
    ``(value, tail)``.  Beyond hi L2 the asymptote h ~ 1/(64 t^2) is added in
    closed form and only its O(L2 / t) correction counts toward ``tail``; the
    lower tail uses the local exponential rate at the first two nodes.
    """
    if power >= 1:
        raise KernelError("t-integrand does not decay at infinity")
    r2 = np.asarray(r2, dtype=float).ravel()
    ax3 = np.abs(np.asarray(x3, dtype=float).ravel())
    L2 = 4 * c + np.sqrt(r2 ** 2 + ax3 ** 2)
    if np.any(L2 <= 0):
        raise KernelError("kernel singular at the origin")
    s = np.linspace(np.log(lo), np.log(hi), n)
    ds = s[1] - s[0]
    wq = np.full(n, ds)
    wq[[0, -1]] *= 0.5
    val = np.empty(r2.size)
    tail = np.empty(r2.size)
    step = max(1, 400_000 // n)
    for i in range(0, r2.size, step):
        sl = slice(i, i + step)
        t = L2[sl, None] * np.exp(s)[None, :]
        f = t ** (power + 1) * np.exp(-c / t) * ev.from_invariants(t, r2[sl, None], ax3[sl, None])
        t_hi = t[:, -1]
        up = H0 * t_hi ** (power - 1) / (1 - power)
        val[sl] = f @ wq + up
        up = up * 4 * L2[sl] / t_hi
        f0, f1 = f[:, 0], f[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            kappa = np.log(f1 / f0) / ds
            low = np.where(f0 > 0, f0 / kappa, 0.0)
        low = np.where(np.isfinite(low) & (low >= 0), low, np.abs(f0) * 1e3)
        tail[sl] = up + low
    if tail_tol is not None:
        bad = tail > tail_tol * np.maximum(np.abs(val), 1e-300)
        if np.any(bad):
            raise KernelError(f"t-coverage insufficient: tail {tail[bad].max():.2e} exceeds tolerance")
    return val, tail


def _invariants(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] ** 2 + x[..., 1] ** 2, np.abs(x[..., 2])


def _unique_eval(fn, *keys):
    """Evaluate ``fn`` once per distinct key tuple and scatter back."""
    shape = np.broadcast(*keys).shape
    stacked = np.stack([np.broadcast_to(k, shape).ravel() for k in keys], axis=1)
    uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
    out = fn(*uniq.T)
    return tuple(o[inv.ravel()].reshape(shape) for o in out) if isinstance(out, tuple) else out[inv.ravel()].reshape(shape)


# ----------------------------------------------------------------------------- Poisson kernel

def poisson_constant(a: float) -> float:
    """C_a = 2^(a-1) / Gamma((1-a)/2)."""
    return 2.0 ** (a - 1) / gamma((1 - a) / 2)


def _check_a(a):
    if not -1 < a < 1:
        raise KernelError(f"need -1 < a < 1, got {a}")


class PoissonKernel:
    """P(x, y) = C_a y^(1-a) int_0^inf t^((a-3)/2) e^(-y^2/(4t)) h(t, x) dt."""

    def __init__(self, s: float, heat=None, n_t: int = 200, tail_tol: float = 1e-6):
        if not 0 < s < 1:
            raise KernelError(f"need 0 < s < 1, got {s}")
        self.s = s
        self.a = 1 - 2 * s
        self.C_a = poisson_constant(self.a)
        self.heat = _heat(heat)
        self.n_t = n_t
        self.tail_tol = tail_tol

    def evaluate(self, x, y):
        """Returns ``(values, tail_estimates)``, broadcasting x[..., :3] against y."""
        r2, ax3 = _invariants(x)
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise KernelError("Poisson kernel needs y > 0")
        a = self.a

        def f(r2u, x3u, yu):
            out = np.empty(r2u.size)
            tl = np.empty(r2u.size)
            for yv in np.unique(yu):
                m = yu == yv
                v, t = _t_integral(self.heat, r2u[m], x3u[m], (a - 3) / 2, yv * yv / 4, self.n_t)
                pref = self.C_a * yv ** (1 - a)
                out[m], tl[m] = pref * v, pref * t
            return out, tl

        vals, tails = _unique_eval(f, r2, ax3, y)
        if np.any(tails > self.tail_tol * np.maximum(vals, 1e-300) + 1e-300):
            raise KernelError("Poisson t-quadrature tail above tolerance")
        return vals, tails

    def __call__(self, x, y):
        return self.evaluate(x, y)[0]

    def polar_values(self, polar: PolarQuadrature, y: float = 1.0):
        """P(delta_y(xi), y) on the (tau, theta) nodes of ``polar`` (no phi dependence)."""
        pts = polar.nodes[:, :, 0, :]
        return self(dilate(y, pts), y)

    def mass(self, y: float = 1.0, polar: PolarQuadrature | None = None) -> dict:
        """int P(x, y) dx by dilation-polar quadrature plus the tau^(-4-2s) far tail."""
        polar = polar or PolarQuadrature(1e-3, 1e4, 200, 32, 1)
        P = self.polar_values(polar, y)
        ang = 2 * np.pi * polar.theta_weights
        core = float(polar.tau_weights @ P @ ang) * y ** 4
        tail = float(P[-1] @ ang * polar.tau_max ** 4) * y ** 4 / (2 * self.s)
        return {"mass": core + tail, "far_tail": tail, "core": core}


def poisson_kernel(x, y, a: float, heat=None) -> np.ndarray:
    _check_a(a)
    return PoissonKernel((1 - a) / 2, heat)(x, y)


@dataclass
class PoissonKernelTable:
    s: float
    a: float
    C_a: float
    y: np.ndarray
    box: Box3
    values: np.ndarray
    mass: np.ndarray
    scaling_residual: np.ndarray
    tails: np.ndarray

    def sidecar(self) -> dict:
        return {"s": self.s, "a": self.a, "C_a": self.C_a, "y": self.y, "mass": self.mass,
                "scaling_residual": self.scaling_residual, "max_tail": self.tails.max(),
                "min_value": self.values.min(),
                "box": {"lower": self.box.lower, "upper": self.box.upper, "counts": self.box.counts}}


def poisson_table(s: float, y_values, box: Box3, heat=None) -> PoissonKernelTable:
    """P(x, y_k) on ``box`` with mass and the scaling P(delta_y xi, y) y^4 = P(xi, 1) per y."""
    K = PoissonKernel(s, heat)
    pts = box.grid().points()
    ys = np.asarray(y_values, dtype=float)
    vals, tails, mass, scal = [], [], [], []
    ref = K(pts, 1.0)
    for yk in ys:
        v, t = K.evaluate(pts, yk)
        vals.append(v)
        tails.append(t.max())
        mass.append(K.mass(yk)["mass"])
        scal.append(np.max(np.abs(yk ** 4 * K(dilate(yk, pts), yk) - ref)) / ref.max())
    return PoissonKernelTable(s, K.a, K.C_a, ys, box, np.stack(vals), np.array(mass), np.array(scal), np.array(tails))


def decay_slope(s: float, rho_range=(8.0, 64.0), n: int = 9, theta: float = 0.4, heat=None) -> float:
    """Log-log slope of P(xi, 1) along a dilation ray, against the gauge norm."""
    K = PoissonKernel(s, heat)
    tau = np.geomspace(*rho_range, n)
    omega = sphere_point(theta, 0.3)
    pts = np.stack([tau * omega[0], tau * omega[1], tau ** 2 * omega[2]], axis=-1)
    P = K(pts, 1.0)
    return float(np.polyfit(np.log(gauge_norm(pts)), np.log(P), 1)[0])


# ----------------------------------------------------------------------------- lift

@dataclass
class LiftResult:
    values: np.ndarray
    truncation_loss: float
    kernel_integral: float


class PoissonLift:
    """u(x, y) = int v(x o delta_y(xi)^-1) P(xi, 1) dxi on a dilation-polar rule.

    This is v * P(., y) after the substitution w = delta_y(xi), using
    P(delta_y xi, y) = y^-4 P(xi, 1).
    """

    def __init__(self, s: float, polar: PolarQuadrature | None = None, heat=None):
        self.kernel = PoissonKernel(s, heat)
        self.polar = polar or PolarQuadrature(1e-3, 1e4, 160, 24, 24)
        P = self.kernel.polar_values(self.polar)
        self.P1 = np.broadcast_to(P[:, :, None], self.polar.weights.shape).ravel()
        self.mass = self.kernel.mass(1.0)["mass"]

    def __call__(self, v, x, y: float, truncation_tol: float = 1e-2, threads: int = 1) -> LiftResult:
        if y <= 0:
            raise KernelError("lift needs y > 0")
        f = v if callable(v) else as_field(v)
        nodes = dilate(y, self.polar.nodes.reshape(-1, 3))
        quad = Quadrature(nodes, y ** 4 * self.polar.weights.ravel())
        res = group_convolve(f, quad, self.P1 / y ** 4, x, kernel_mass=1.0,
                             truncation_tol=truncation_tol, threads=threads)
        return LiftResult(res.value, res.truncation_loss, res.kernel_integral)

    def field(self, v, y: float, step: float = 1e-2) -> ClosureField:
        return ClosureField(lambda p: self(v, p.reshape(-1, 3), y).value.reshape(p.shape[:-1]), 3, step=step)

    def extension_field(self, v, step: float = 1e-2) -> ClosureField:
        """(x1, x2, x3, y) -> u(x, y) with u(x, 0) = v(x)."""
        def u(Z):
            Z = np.asarray(Z, dtype=float)
            flat = Z.reshape(-1, 4)
            out = np.empty(flat.shape[0])
            for yv in np.unique(flat[:, 3]):
                m = flat[:, 3] == yv
                out[m] = v(flat[m, :3]) if yv <= 0 else self(v, flat[m, :3], float(yv)).values
            return out.reshape(Z.shape[:-1])
        return ClosureField(u, 4, step=step)


@functools.lru_cache(maxsize=8)
def _default_lift(s: float) -> PoissonLift:
    return PoissonLift(s)


def lift(v, y: float, a: float, points, polar: PolarQuadrature | None = None) -> LiftResult:
    _check_a(a)
    s = (1 - a) / 2
    engine = PoissonLift(s, polar) if polar is not None else _default_lift(s)
    return engine(v, points, y)


# ----------------------------------------------------------------------------- Riesz kernels

def _riesz_prefactor(beta: float) -> float:
    if 0 < beta < 4:
        return 1.0 / gamma(beta / 2)
    if beta < 0 and not float(beta / 2).is_integer():
        return (beta / 2) / gamma(beta / 2)
    raise KernelError(f"beta = {beta} outside (0, 4) and the admissible negative range")


def riesz_kernel(beta: float, x, heat=None) -> np.ndarray:
    """R_beta for 0 < beta < 4, R~_beta for negative non-even-integer beta."""
    pref = _riesz_prefactor(beta)
    r2, ax3 = _invariants(x)
    if np.any(r2 ** 2 + ax3 ** 2 == 0):
        raise KernelError("Riesz kernels are singular at x = 0")
    ev = _heat(heat)
    val = _unique_eval(lambda a, b: _t_integral(ev, a, b, beta / 2 - 1, 0.0, n=280, hi=1e7, tail_tol=1e-6)[0], r2, ax3)
    return pref * val


def rho_norm(x, alpha: float = 1.0, heat=None) -> np.ndarray:
    """rho = R_(2-alpha)^(-1/(2+alpha)), a homogeneous norm for 0 < alpha < 2."""
    if not 0 < alpha < 2:
        raise KernelError("need 0 < alpha < 2")
    return riesz_kernel(2 - alpha, x, heat) ** (-1.0 / (2 + alpha))


@dataclass
class RieszKernelTable:
    beta: float
    points: np.ndarray
    values: np.ndarray
    homogeneity_residual: dict

    @property
    def positive(self) -> bool:
        return bool(np.all(self.values > 0))


def riesz_table(beta: float, r_inner: float = 0.5, r_outer: float = 2.0, n_tau: int = 5, n_theta: int = 9,
                n_phi: int = 4, scales=(0.5, 2.0), heat=None) -> RieszKernelTable:
    """R~_beta (or R_beta) on a gauge annulus, with its degree beta - 4 homogeneity residual."""
    tau = np.geomspace(r_inner, r_outer, n_tau)
    theta, _ = gauge_sphere_angles(n_theta)
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    om = sphere_point(theta[:, None], phi[None, :])
    pts = np.concatenate([tau[:, None, None, None] * om[None, ..., :2], tau[:, None, None, None] ** 2 * om[None, ..., 2:]],
                         axis=-1).reshape(-1, 3)
    vals = riesz_kernel(beta, pts, heat)
    res = {float(r): float(np.max(np.abs(riesz_kernel(beta, dilate(r, pts), heat) / (r ** (beta - 4) * vals) - 1)))
           for r in scales}
    return RieszKernelTable(beta, pts, vals, res)


# ----------------------------------------------------------------------------- fractional sub-Laplacian

class FractionalSublaplacian:
    """(-Delta_H)^s by the gradient-compensated integral over H1.

    In dilation-polar coordinates y = delta_tau(omega) the kernel is
    tau^(-4-2s) K(omega), K depending on the latitude only.  The unit rho-ball
    is tau < tau1(omega) = 1/rho(omega).  There the compensated difference is
    O(tau^2) and a Gauss-Jacobi rule with weight tau^(1-2s) is used; outside,
    the plain difference is integrated in log tau with an analytic tail.

    ``convention="standard"`` uses the positive kernel (1/|Gamma(-s)|) int t^(-s-1) h dt,
    giving the operator with spectral symbol lambda^s.  ``"literal"`` gives
    int (v(x o y) - v(x) - omega <grad_H v(x), y>) R~_(-2s)(y) dy with the R~
    normalization, which equals -s times the standard operator.
    """

    def __init__(self, s: float, n_near: int = 20, n_far: int = 64, n_theta: int = 24, n_phi: int = 32,
                 tau_max: float = 1e4, rho_alpha: float = 1.0, convention: str = "standard", heat=None):
        if not 0 < s < 1:
            raise KernelError("need 0 < s < 1")
        if convention not in ("standard", "literal"):
            raise KernelError("convention must be 'standard' or 'literal'")
        ev = _heat(heat)
        self.s, self.convention, self.tau_max = s, convention, tau_max
        self.theta, self.theta_w = gauge_sphere_angles(n_theta)
        self.phi = np.arange(n_phi) * 2 * np.pi / n_phi
        self.phi_w = 2 * np.pi / n_phi
        om = sphere_point(self.theta, 0.0)
        self.K = riesz_kernel(-2 * s, om, ev) / s          # positive standard kernel on the sphere
        self.tau1 = 1.0 / rho_norm(om, rho_alpha, ev)
        self.omega = sphere_point(self.theta[:, None], self.phi[None, :])   # (nth, nph, 3)
        z, w = roots_jacobi(n_near, 0.0, 1.0 - 2 * s)
        self._near_z = (1 + z) / 2
        self._near_w = w * 0.5 ** (2 - 2 * s)
        panels = 8
        self._far_u, self._far_w = _composite_gl(np.linspace(0.0, 1.0, panels + 1), n_far // panels)

    def _points(self, x, tau):
        """x o delta_tau(omega) for x (M,3), tau (nth, n) -> (M, nth, nph, n, 3)."""
        t = tau[:, None, :, None]
        om = self.omega[:, :, None, :]
        d = np.concatenate([t * om[..., :2], t ** 2 * om[..., 2:]], axis=-1)
        return group_mul(x[:, None, None, None, :], d[None])

    def __call__(self, v, x, return_tail: bool = False):
        f = as_field(v)
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        s = self.s
        vx = f(xs)
        gx, gy = X(f)(xs), Y(f)(xs)
        # near field: int_0^tau1 tau^(1-2s) [compensated difference / tau^2] dtau
        tn = self.tau1[:, None] * self._near_z[None, :]
        vn = f(self._points(xs, tn))
        om = self.omega[None, :, :, None, :]
        lin = tn[None, :, None, :] * (gx[:, None, None, None] * om[..., 0] + gy[:, None, None, None] * om[..., 1])
        Fn = (vx[:, None, None, None] - vn + lin) / tn[None, :, None, :] ** 2
        wn = self._near_w[None, :] * self.tau1[:, None] ** (2 - 2 * s)
        near = np.einsum("mtpn,tn->mt", Fn, wn) * self.phi_w
        # far field: int_tau1^tau_max tau^(-1-2s) (v(x) - v(x o delta_tau omega)) dtau, u = log tau
        lo = np.log(self.tau1)[:, None]
        span = np.log(self.tau_max) - lo
        u = lo + span * self._far_u[None, :]
        tf = np.exp(u)
        vf = f(self._points(xs, tf))
        Gf = vx[:, None, None, None] - vf
        wf = span * self._far_w[None, :] * tf ** (-2 * s)
        far = np.einsum("mtpn,tn->mt", Gf, wf) * self.phi_w
        v_end = f(self._points(xs, np.full((self.theta.size, 1), self.tau_max)))[..., 0]
        g_end = (vx[:, None, None] - v_end).sum(axis=2) * self.phi_w
        tail = g_end * self.tau_max ** (-2 * s) / (2 * s)
        tail_err = np.abs(v_end).max(axis=(1, 2)) * (2 * np.pi * self.K @ self.theta_w) * self.tau_max ** (-2 * s) / (2 * s)
        total = (near + far + tail) @ (self.K * self.theta_w)
        if self.convention == "literal":
            total = -s * total
            tail_err = s * tail_err
        out = total if np.asarray(x).ndim > 1 else total[0]
        return (out, tail_err) if return_tail else out


@functools.lru_cache(maxsize=8)
def _default_fractional(s: float, convention: str = "standard") -> FractionalSublaplacian:
    return FractionalSublaplacian(s, convention=convention)


def fractional_sublaplacian(v, x, s: float, riesz: FractionalSublaplacian | None = None,
                            truncation_tol: float | None = None):
    op = riesz if riesz is not None else _default_fractional(s)
    val, tail = op(v, x, return_tail=True)
    if truncation_tol is not None and np.any(tail > truncation_tol):
        raise TruncationError(f"far-field truncation estimate {np.max(tail):.2e} above tolerance")
    return val


def spectral_dtn_constant(s: float) -> float:
    """2^(1-2s) Gamma(1-s)/Gamma(s): the limit of -y^a u_y / (-Delta)^s v for the mass-one lift."""
    return 2 ** (1 - 2 * s) * gamma(1 - s) / gamma(s)


@dataclass
class DtNReport:
    s: float
    y: np.ndarray
    points: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    ratio: np.ndarray
    mask: np.ndarray
    extrapolated: np.ndarray

    def cv(self, which: str = "extrapolated") -> float:
        r = (self.extrapolated if which == "extrapolated" else self.ratio[0])[self.mask]
        return float(np.std(r) / abs(np.mean(r)))

    def mean(self, which: str = "extrapolated") -> float:
        r = (self.extrapolated if which == "extrapolated" else self.ratio[0])[self.mask]
        return float(np.mean(r))


def dirichlet_to_neumann_ratio(v, s: float, y_small, points, guard: float = 1e-2,
                               lift_engine: PoissonLift | None = None,
                               frac: FractionalSublaplacian | None = None) -> DtNReport:
    """r(x, y) = -y^a du/dy(x, y) / (-Delta_H)^s v(x) for each y in ``y_small``.

    du/dy is a centred difference with half-width y/4.  ``extrapolated`` is
    the Richardson combination of the two smallest y in the variable
    y^(2-2s), the exponent of the leading correction.  Points whose
    denominator is below ``guard`` times the largest one are masked out.
    """
    f = as_field(v)
    a = 1 - 2 * s
    eng = lift_engine or _default_lift(s)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ys = np.sort(np.asarray(y_small, dtype=float))
    den = fractional_sublaplacian(f, pts, s, frac)
    num = np.empty((ys.size, pts.shape[0]))
    for i, y in enumerate(ys):
        d = y / 4
        up = eng(f, pts, y + d).values
        dn = eng(f, pts, y - d).values
        num[i] = -y ** a * (up - dn) / (2 * d)
    mask = np.abs(den) > guard * np.abs(den).max()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mask[None, :], num / den[None, :], np.nan)
    if ys.size >= 2:
        p = 2 - 2 * s
        w0, w1 = ys[0] ** p, ys[1] ** p
        extra = (w1 * ratio[0] - w0 * ratio[1]) / (w1 - w0)
    else:
        extra = ratio[0]
    return DtNReport(s, ys, pts, num, den, ratio, mask, extra)
