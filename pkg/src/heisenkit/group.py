"""Group law, dilations, gauge norms and group convolution on H1.

Points are ``(..., 3)`` arrays (or :class:`GroupPoint` tuples); every function
broadcasts over leading axes.  Scalar :class:`GroupPoint` inputs give
:class:`GroupPoint` outputs.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .grids import Box3, GeometryError, Quadrature


class GroupPoint(NamedTuple):
    x1: float
    x2: float
    x3: float


class ExtendedPoint(NamedTuple):
    p: GroupPoint
    y: float

    def as_array(self) -> np.ndarray:
        if self.y < 0:
            raise GeometryError("extension coordinate must be nonnegative")
        return np.array([*self.p, self.y], dtype=float)


def _wrap(out: np.ndarray, *inputs):
    if all(isinstance(p, GroupPoint) for p in inputs):
        return GroupPoint(*(float(c) for c in out))
    return out


def group_mul(p, q):
    """(p1+q1, p2+q2, p3+q3+2(p2 q1 - p1 q2))."""
    a = np.asarray(p, dtype=float)
    b = np.asarray(q, dtype=float)
    out = np.stack(np.broadcast_arrays(
        a[..., 0] + b[..., 0],
        a[..., 1] + b[..., 1],
        a[..., 2] + b[..., 2] + 2.0 * (a[..., 1] * b[..., 0] - a[..., 0] * b[..., 1]),
    ), axis=-1)
    return _wrap(out, p, q)


def group_inv(p):
    out = -np.asarray(p, dtype=float)
    return _wrap(out, p)


def dilate(lam: float, p):
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    a = np.asarray(p, dtype=float)
    out = np.concatenate([lam * a[..., :2], lam ** 2 * a[..., 2:3]], axis=-1)
    return _wrap(out, p)


def gauge_norm(p):
    a = np.asarray(p, dtype=float)
    r2 = a[..., 0] ** 2 + a[..., 1] ** 2
    out = (r2 ** 2 + a[..., 2] ** 2) ** 0.25
    return float(out) if isinstance(p, GroupPoint) else out


def extended_norm(Z):
    """(|x|_H^2 + y^2)^(1/2) for Z = (x1, x2, x3, y)."""
    if isinstance(Z, ExtendedPoint):
        Z = Z.as_array()
    a = np.asarray(Z, dtype=float)
    g = gauge_norm(a[..., :3])
    out = np.sqrt(g ** 2 + a[..., 3] ** 2)
    return float(out) if out.ndim == 0 else out


def left_translate(z, field: Callable) -> Callable:
    """``field`` composed with left translation by ``z``: p -> field(z o p)."""
    return lambda pts: field(group_mul(np.asarray(z, dtype=float), pts))


def haar_scaling_check(box: Box3, lam: float) -> float:
    """|delta_lam(A)| / |A| for an axis-aligned box A.

    The dilation maps axis-aligned boxes to axis-aligned boxes, so the image
    volume is read off from the mapped corners.
    """
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    lo = np.asarray(box.lower[:3])
    hi = np.asarray(box.upper[:3])
    if np.any(hi - lo <= 0):
        raise GeometryError("degenerate box")
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(3, -1).T
    img = dilate(lam, corners)
    vol = np.prod(img.max(axis=0) - img.min(axis=0))
    return float(vol / np.prod(hi - lo))


def gauge_ball_volume(radius: float, counts: int = 81) -> float:
    """Midpoint-rule volume of {gauge_norm < radius} on an enclosing box."""
    box = Box3((-radius, -radius, -radius ** 2), (radius, radius, radius ** 2), (counts,) * 3)
    g = box.grid()
    inside = gauge_norm(g.cell_centers().points()) < radius
    return float(np.sum(inside * g.cell_volumes()))


@dataclass
class ConvolutionResult:
    value: np.ndarray
    truncation_loss: float
    kernel_integral: float


class TruncationError(GeometryError):
    """The sampled kernel misses more mass than the declared tolerance."""


def group_convolve(f: Callable, quad: Quadrature, kernel_values, x, *, kernel_mass: float | None = None,
                   truncation_tol: float = 1e-2, threads: int = 1, chunk: int | None = None) -> ConvolutionResult:
    """Quadrature for (f * g)(x) = int f(y) g(y^-1 o x) dy.

    With w = y^-1 o x the integral becomes int f(x o w^-1) g(w) dw, so the
    kernel ``g`` is sampled once on ``quad`` and ``f`` is evaluated at the
    translated nodes.  ``kernel_mass`` (the integral of |g| over all of H1)
    turns the missing sampled mass into the truncation-loss estimate.
    """
    g = np.asarray(kernel_values, dtype=float).ravel()
    if g.size != len(quad):
        raise GeometryError("kernel samples do not match the quadrature nodes")
    sampled = float(np.dot(quad.weights, np.abs(g)))
    loss = 0.0 if kernel_mass is None else max(kernel_mass - sampled, 0.0)
    if kernel_mass is not None and loss > truncation_tol * max(kernel_mass, 1e-300):
        raise TruncationError(f"kernel truncation loss {loss:.3e} exceeds tolerance; enlarge the domain")
    wg = quad.weights * g
    inv_nodes = group_inv(quad.nodes)
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    if chunk is None:
        chunk = max(1, 2_000_000 // max(len(quad), 1))

    def block(i0):
        xb = xs[i0:i0 + chunk]
        pts = group_mul(xb[:, None, :], inv_nodes[None, :, :])
        return np.asarray(f(pts), dtype=float) @ wg

    starts = range(0, xs.shape[0], chunk)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(i) for i in starts]
    vals = np.concatenate(parts)
    if np.asarray(x).ndim == 1:
        vals = vals[0]
    return ConvolutionResult(vals, loss, sampled)
