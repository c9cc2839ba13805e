"""Scalar fields with derivative oracles and the left-invariant operators.

X = d/dx1 + 2 x2 d/dx3,  Y = d/dx2 - 2 x1 d/dx3,  T = [X, Y] = -4 d/dx3.

Three oracle kinds share one interface:

* :class:`SymbolicField` -- closed form, derivatives by sympy.
* :class:`ClosureField` -- any callable, centred differences with a fixed step.
* :class:`GridField` -- samples on a tensor grid, centred differences on the
  grid; every derivative widens the invalid margin by one cell.

An operator applied to a field returns another field of the same kind, so
nested derivatives (Hessians, T X u, ...) compose naturally.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.interpolate import RegularGridInterpolator

from .grids import GeometryError, TensorGrid

COORD_NAMES = ("x1", "x2", "x3", "y")

# (axis, coefficient) pairs; coefficients accept numpy arrays or sympy symbols.
X_COEFFS = ((0, lambda c: 1), (2, lambda c: 2 * c[1]))
Y_COEFFS = ((1, lambda c: 1), (2, lambda c: -2 * c[0]))
T_COEFFS = ((2, lambda c: -4),)
DY_COEFFS = ((3, lambda c: 1),)


class StencilError(GeometryError):
    """Evaluation requested inside the finite-difference margin."""


class ScalarField:
    dim: int = 3
    oracle: str = "closed-form"

    def __call__(self, pts) -> np.ndarray:
        raise NotImplementedError

    def apply(self, coeffs, key=None) -> "ScalarField":
        """First-order operator sum_k c_k(x) d/dx_k applied to the field."""
        if key is not None:
            cache = self.__dict__.setdefault("_op_cache", {})
            if key not in cache:
                cache[key] = self._apply(coeffs)
            return cache[key]
        return self._apply(coeffs)

    def _apply(self, coeffs):
        raise NotImplementedError

    def _check_dim(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.dim:
            raise GeometryError(f"field on a {self.dim}-dimensional domain got points of size {pts.shape[-1]}")
        return pts


class SymbolicField(ScalarField):
    """Closed-form field; ``expr`` is a sympy expression or string in x1, x2, x3 (, y)."""

    oracle = "closed-form"

    def __init__(self, expr, dim: int = 3):
        self.dim = dim
        self.symbols = sp.symbols(COORD_NAMES[:dim], real=True)
        loc = {str(s): s for s in self.symbols}
        self.expr = sp.sympify(expr, locals=loc) if isinstance(expr, str) else sp.sympify(expr)
        self._fn = None

    def __repr__(self):
        return f"SymbolicField({self.expr})"

    def __call__(self, pts):
        pts = self._check_dim(pts)
        if self._fn is None:
            self._fn = sp.lambdify(self.symbols, self.expr, "numpy")
        out = self._fn(*(pts[..., k] for k in range(self.dim)))
        return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1]).copy()

    def _apply(self, coeffs):
        e = sum(sp.sympify(c(self.symbols)) * sp.diff(self.expr, self.symbols[a]) for a, c in coeffs)
        return SymbolicField(e, self.dim)


class ClosureField(ScalarField):
    """Callable field; derivatives are centred differences with spacing ``step``."""

    oracle = "finite-difference"

    def __init__(self, func: Callable, dim: int = 3, domain=None, step: float = 1e-3, margin: int = 0):
        self.func = func
        self.dim = dim
        self.domain = domain
        self.step = step
        self.margin = margin

    def __call__(self, pts):
        pts = self._check_dim(pts)
        if self.domain is not None and not np.all(self.domain.contains(pts, self.margin * self.step)):
            raise StencilError("point outside the stencil-safe region of the finite-difference oracle")
        return np.asarray(self.func(pts), dtype=float)

    def _apply(self, coeffs):
        f, h = self.func, self.step

        def g(pts):
            out = 0.0
            for a, c in coeffs:
                e = np.zeros(self.dim)
                e[a] = h
                out = out + c([pts[..., k] for k in range(self.dim)]) * (f(pts + e) - f(pts - e)) / (2 * h)
            return np.broadcast_to(out, pts.shape[:-1])

        return ClosureField(g, self.dim, self.domain, h, self.margin + 1)


class GridField(ScalarField):
    """Samples on a tensor grid with per-axis invalid margins ``(dim, 2)``.

    ``onesided_y`` lets the y derivative use a second-order one-sided stencil
    at the y = 0 face instead of widening the margin there.
    """

    oracle = "finite-difference"

    def __init__(self, values, grid: TensorGrid, margins=None, onesided_y: bool = True):
        self.grid = grid if isinstance(grid, TensorGrid) else TensorGrid(tuple(grid))
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GeometryError(f"values {self.values.shape} do not match grid {self.grid.shape}")
        self.dim = self.grid.dim
        self.margins = np.zeros((self.dim, 2), dtype=int) if margins is None else np.asarray(margins, dtype=int)
        self.onesided_y = onesided_y
        self._interp = None

    @classmethod
    def sample(cls, field: Callable, grid: TensorGrid, **kw) -> "GridField":
        return cls(np.asarray(field(grid.points()), dtype=float), grid, **kw)

    def valid_slices(self) -> tuple:
        return tuple(slice(lo, n - hi) for (lo, hi), n in zip(self.margins, self.grid.shape))

    def valid_bounds(self):
        lo = np.array([a[m[0]] for a, m in zip(self.grid.axes, self.margins)])
        hi = np.array([a[a.size - 1 - m[1]] for a, m in zip(self.grid.axes, self.margins)])
        return lo, hi

    def __call__(self, pts):
        pts = self._check_dim(pts)
        lo, hi = self.valid_bounds()
        tol = 1e-12 * (1 + np.abs(hi - lo))
        if not np.all((pts >= lo - tol) & (pts <= hi + tol)):
            raise StencilError("point inside the finite-difference margin of a grid field")
        idx = self._node_index(pts)
        if idx is not None:
            return self.values[idx]
        if self._interp is None:
            vals = np.where(np.isfinite(self.values), self.values, 0.0)
            self._interp = RegularGridInterpolator(self.grid.axes, vals, method="linear")
        flat = np.clip(pts.reshape(-1, self.dim), self.grid.lower, self.grid.upper)
        return self._interp(flat).reshape(pts.shape[:-1])

    def _node_index(self, pts):
        """Integer indices when every point is a grid node, else None."""
        idx = []
        for k, ax in enumerate(self.grid.axes):
            c = pts[..., k]
            i = np.clip(np.searchsorted(ax, c), 0, ax.size - 1)
            if not np.array_equal(ax[i], c):
                return None
            idx.append(i)
        return tuple(idx)

    def partial_values(self, axis: int):
        ax = self.grid.axes[axis]
        d = np.gradient(self.values, ax, axis=axis, edge_order=2)
        m = self.margins.copy()
        if self.dim == 4 and axis == 3 and self.onesided_y and m[3, 0] == 0:
            m[3, 1] += 1
        else:
            m[axis] += 1
        return d, m

    def _apply(self, coeffs):
        mesh = self.grid.mesh()
        out = np.zeros_like(self.values)
        margins = self.margins.copy()
        for a, c in coeffs:
            d, m = self.partial_values(a)
            out = out + c(mesh) * d
            margins = np.maximum(margins, m)
        return GridField(out, self.grid, margins, self.onesided_y)


def pointwise(func: Callable, *fields: ScalarField) -> ScalarField:
    """Pointwise combination ``func(xp, *values)`` of fields of one kind.

    ``xp`` is sympy for symbolic fields and numpy otherwise, so ``func`` can
    call ``xp.sqrt``.
    """
    first = fields[0]
    if all(isinstance(f, SymbolicField) for f in fields):
        return SymbolicField(func(sp, *(f.expr for f in fields)), first.dim)
    if all(isinstance(f, GridField) for f in fields):
        margins = np.maximum.reduce([f.margins for f in fields])
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = func(np, *(f.values for f in fields))
        return GridField(vals, first.grid, margins, first.onesided_y)
    if all(isinstance(f, ClosureField) for f in fields):
        return ClosureField(lambda p: func(np, *(f.func(p) for f in fields)), first.dim, first.domain,
                            first.step, max(f.margin for f in fields))
    raise TypeError("pointwise combination needs fields with the same oracle kind")


def X(u: ScalarField) -> ScalarField:
    return u.apply(X_COEFFS, "X")


def Y(u: ScalarField) -> ScalarField:
    return u.apply(Y_COEFFS, "Y")


def T(u: ScalarField) -> ScalarField:
    return u.apply(T_COEFFS, "T")


def Dy(u: ScalarField) -> ScalarField:
    if u.dim != 4:
        raise GeometryError("d/dy needs a field on H1 x [0, inf)")
    return u.apply(DY_COEFFS, "Dy")


def kohn_laplacian(u: ScalarField) -> ScalarField:
    return pointwise(lambda xp, a, b: a + b, X(X(u)), Y(Y(u)))


def _point(p):
    arr = np.asarray(p, dtype=float)
    return arr, arr.ndim == 1


def _eval(field: ScalarField, p):
    arr, scalar = _point(p)
    out = field(arr)
    return float(out) if scalar else out


def apply_X(u: ScalarField, p):
    return _eval(X(u), p)


def apply_Y(u: ScalarField, p):
    return _eval(Y(u), p)


def apply_T(u: ScalarField, p):
    return _eval(T(u), p)


@dataclass
class HorizontalVector:
    """Components in the orthonormal (X, Y) frame at ``base``."""

    alpha: np.ndarray
    beta: np.ndarray
    base: np.ndarray | None = None

    @property
    def norm(self):
        return np.hypot(self.alpha, self.beta)

    def dot(self, other: "HorizontalVector"):
        return self.alpha * other.alpha + self.beta * other.beta


@dataclass
class HorizontalHessian:
    """Entries of Hu = [[XXu, YXu], [XYu, YYu]] (YXu means Y applied to Xu)."""

    xx: np.ndarray
    yx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray

    @property
    def norm_sq(self):
        return self.xx ** 2 + self.yx ** 2 + self.xy ** 2 + self.yy ** 2

    @property
    def norm(self):
        return np.sqrt(self.norm_sq)

    def matrix(self) -> np.ndarray:
        return np.stack([np.stack([self.xx, self.yx], -1), np.stack([self.xy, self.yy], -1)], -2)

    def squared(self) -> np.ndarray:
        """(Hu)(Hu)^T."""
        m = self.matrix()
        return m @ np.swapaxes(m, -1, -2)

    def matvec(self, v: HorizontalVector) -> HorizontalVector:
        return HorizontalVector(self.xx * v.alpha + self.yx * v.beta, self.xy * v.alpha + self.yy * v.beta, v.base)

    def commutator(self):
        """XYu - YXu, equal to Tu."""
        return self.xy - self.yx


def horizontal_gradient(u: ScalarField, p) -> HorizontalVector:
    arr, _ = _point(p)
    return HorizontalVector(_eval(X(u), p), _eval(Y(u), p), arr)


def extended_gradient(u: ScalarField, Z):
    """(Xu, Yu, du/dy) at Z = (x1, x2, x3, y)."""
    return _eval(X(u), Z), _eval(Y(u), Z), _eval(Dy(u), Z)


def horizontal_hessian(u: ScalarField, p) -> HorizontalHessian:
    xu, yu = X(u), Y(u)
    return HorizontalHessian(_eval(X(xu), p), _eval(Y(xu), p), _eval(X(yu), p), _eval(Y(yu), p))


def hb_divergence(h1: ScalarField, h2: ScalarField, h3: ScalarField, Z):
    return _eval(X(h1), Z) + _eval(Y(h2), Z) + _eval(Dy(h3), Z)


def commutator_residual(u: ScalarField, p):
    """(XYu - YXu - Tu)(p)."""
    return _eval(X(Y(u)), p) - _eval(Y(X(u)), p) - _eval(T(u), p)


def as_field(obj, dim: int = 3, **kw) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    if isinstance(obj, (str, sp.Basic)):
        return SymbolicField(obj, dim)
    if callable(obj):
        return ClosureField(obj, dim, **kw)
    raise TypeError(f"cannot build a field from {type(obj).__name__}")


def polynomial_family(dim: int = 3, rng=None, n_random: int = 3) -> list[SymbolicField]:
    """Test family: x1, x2, x3, x1 x2, x1^2 + x2^2, x1^3 - 3 x1 x2^2 and random cubics."""
    s = sp.symbols(COORD_NAMES[:dim], real=True)
    x1, x2, x3 = s[:3]
    fam = [x1, x2, x3, x1 * x2, x1 ** 2 + x2 ** 2, x1 ** 3 - 3 * x1 * x2 ** 2]
    rng = np.random.default_rng(0) if rng is None else rng
    monos = [x1, x2, x3, x1 ** 2, x1 * x2, x2 ** 2, x1 * x3, x2 * x3, x3 ** 2,
             x1 ** 3, x1 ** 2 * x2, x1 * x2 ** 2, x2 ** 3, x1 * x2 * x3]
    if dim == 4:
        monos += [s[3] * x1, s[3] ** 2, s[3] * x2 * x3]
    for _ in range(n_random):
        coef = np.round(rng.uniform(-1, 1, len(monos)), 3)
        fam.append(sum(sp.Rational(str(c)) * m for c, m in zip(coef, monos)))
    return [SymbolicField(e, dim) for e in fam]


def sample_points(n: int, lower: Sequence[float], upper: Sequence[float], rng=None) -> np.ndarray:
    rng = np.random.default_rng(0) if rng is None else rng
    return rng.uniform(np.asarray(lower, float), np.asarray(upper, float), size=(n, len(lower)))
