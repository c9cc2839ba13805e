"""Axis-aligned sampling boxes and quadrature rules on H1 and H1 x [0, inf).

Boxes live in the global (x1, x2, x3) chart.  Quadrature rules are plain
``(nodes, weights)`` pairs so that the convolution and the weighted-energy
integrals can run on any of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    """Raised for degenerate boxes or points outside a sampled region."""


@dataclass(frozen=True)
class TensorGrid:
    """Tensor product of 1D coordinate arrays (ascending, possibly non-uniform)."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for a in axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise GeometryError("grid axes must be strictly increasing with >= 2 nodes")
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self) -> np.ndarray:
        """All nodes as an array of shape ``shape + (dim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        w = None
        for a in self.axes:
            wa = np.zeros_like(a)
            d = np.diff(a)
            wa[:-1] += d / 2
            wa[1:] += d / 2
            w = wa if w is None else np.multiply.outer(w, wa)
        return w

    def cell_centers(self) -> "TensorGrid":
        return TensorGrid(tuple(0.5 * (a[1:] + a[:-1]) for a in self.axes))

    def cell_volumes(self) -> np.ndarray:
        w = None
        for a in self.axes:
            d = np.diff(a)
            w = d if w is None else np.multiply.outer(w, d)
        return w

    def uniform_spacing(self) -> np.ndarray | None:
        h = []
        for a in self.axes:
            d = np.diff(a)
            if not np.allclose(d, d[0], rtol=1e-10, atol=0):
                return None
            h.append(d[0])
        return np.array(h)


@dataclass(frozen=True)
class Box3:
    """Box in H1 sampled with ``counts`` nodes per axis (uniform spacing)."""

    lower: tuple
    upper: tuple
    counts: tuple

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        n = np.asarray(self.counts, dtype=int)
        if lo.shape != (self.ndim,) or hi.shape != (self.ndim,) or n.shape != (self.ndim,):
            raise GeometryError(f"expected {self.ndim} lower/upper/count entries")
        if np.any(hi - lo <= 0) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise GeometryError("box extents must be finite and strictly positive")
        if np.any(n < 2):
            raise GeometryError("need at least two samples per axis")
        object.__setattr__(self, "lower", tuple(lo))
        object.__setattr__(self, "upper", tuple(hi))
        object.__setattr__(self, "counts", tuple(int(c) for c in n))

    ndim = 3

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / (np.asarray(self.counts) - 1)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))

    def axes(self) -> tuple:
        return tuple(np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.counts))

    def grid(self) -> TensorGrid:
        return TensorGrid(self.axes())

    def contains(self, pts, margin=0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        m = np.broadcast_to(np.asarray(margin, dtype=float), (self.ndim,))
        lo = np.asarray(self.lower) + m
        hi = np.asarray(self.upper) - m
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def quadrature(self) -> "Quadrature":
        """Node-centred midpoint rule: every node carries the volume of its dual cell."""
        g = self.grid()
        pts = g.points().reshape(-1, self.ndim)
        w = np.full(pts.shape[0], float(np.prod(self.spacing)))
        return Quadrature(pts, w, shape=g.shape)


@dataclass(frozen=True)
class Box4(Box3):
    """Box in H1 x [0, y_max]; the last axis is the extension variable y.

    ``y_ratio > 1`` grades the y nodes geometrically so that the smallest cell
    sits at y = 0.
    """

    y_ratio: float = 1.0

    ndim = 4

    def __post_init__(self):
        super().__post_init__()
        if self.lower[3] < 0:
            raise GeometryError("extension coordinate must satisfy y >= 0")
        if not (1.0 <= self.y_ratio <= 1.2):
            raise GeometryError("y grading ratio must lie in [1, 1.2]")

    def y_axis(self) -> np.ndarray:
        n = self.counts[3]
        y0, y1 = self.lower[3], self.upper[3]
        if self.y_ratio == 1.0:
            return np.linspace(y0, y1, n)
        d = self.y_ratio ** np.arange(n - 1)
        return y0 + (y1 - y0) * np.concatenate([[0.0], np.cumsum(d)]) / d.sum()

    def axes(self) -> tuple:
        ax = [np.linspace(a, b, n) for a, b, n in zip(self.lower[:3], self.upper[:3], self.counts[:3])]
        return tuple(ax) + (self.y_axis(),)

    @property
    def spacing(self) -> np.ndarray:
        h = super().spacing
        if self.y_ratio != 1.0:
            h[3] = np.nan
        return h

    def quadrature(self) -> "Quadrature":
        g = self.grid()
        pts = g.points().reshape(-1, 4)
        return Quadrature(pts, g.trapezoid_weights().ravel(), shape=g.shape)


@dataclass
class Quadrature:
    """Weighted point set; ``shape`` records a tensor layout when there is one."""

    nodes: np.ndarray
    weights: np.ndarray
    shape: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise GeometryError("nodes and weights disagree in length")

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float).ravel()))

    def __len__(self):
        return self.weights.size


def gauge_sphere_angles(n_sigma: int):
    """Gauss-Legendre nodes on the gauge unit sphere, by latitude.

    A point of the sphere {(x1^2 + x2^2)^2 + x3^2 = 1} is written
    ``(sqrt(cos t) cos p, sqrt(cos t) sin p, sin t)`` with ``t = (pi/2) sin s``.
    The substitution removes the square-root endpoint behaviour at the poles.
    Returns ``(theta, dtheta_weights)``.
    """
    z, w = np.polynomial.legendre.leggauss(n_sigma)
    sigma = z * np.pi / 2
    theta = np.pi / 2 * np.sin(sigma)
    wt = w * (np.pi / 2) * (np.pi / 2) * np.cos(sigma)
    return theta, wt


def sphere_point(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    rc = np.sqrt(np.clip(np.cos(theta), 0.0, None))
    return np.stack(np.broadcast_arrays(rc * np.cos(phi), rc * np.sin(phi), np.sin(theta)), axis=-1)


@dataclass
class PolarQuadrature:
    """Dilation-polar rule on H1: x = delta_tau(omega), dx = tau^3 dtau dtheta dphi.

    ``tau`` nodes are log-spaced (trapezoid in log tau), latitudes use
    :func:`gauge_sphere_angles`, longitudes are uniform (spectral for periodic
    integrands).  ``weights[i, j, k]`` multiplies the integrand at
    ``nodes[i, j, k]`` with indices (tau, theta, phi).
    """

    tau_min: float = 1e-3
    tau_max: float = 1e4
    n_tau: int = 160
    n_theta: int = 24
    n_phi: int = 24

    def __post_init__(self):
        if not (0 < self.tau_min < self.tau_max):
            raise GeometryError("need 0 < tau_min < tau_max")
        s = np.linspace(np.log(self.tau_min), np.log(self.tau_max), self.n_tau)
        ds = s[1] - s[0]
        ws = np.full(self.n_tau, ds)
        ws[[0, -1]] *= 0.5
        self.tau = np.exp(s)
        self.tau_weights = ws * self.tau ** 4
        self.theta, self.theta_weights = gauge_sphere_angles(self.n_theta)
        self.phi = np.arange(self.n_phi) * (2 * np.pi / self.n_phi)
        self.phi_weights = np.full(self.n_phi, 2 * np.pi / self.n_phi)
        omega = sphere_point(self.theta[:, None], self.phi[None, :])
        self.omega = omega
        t = self.tau[:, None, None, None]
        self.nodes = np.concatenate([t * omega[None, ..., :2], t ** 2 * omega[None, ..., 2:]], axis=-1)
        self.weights = (self.tau_weights[:, None, None] * self.theta_weights[None, :, None]
                        * self.phi_weights[None, None, :])

    def quadrature(self) -> Quadrature:
        return Quadrature(self.nodes.reshape(-1, 3), self.weights.ravel(),
                          shape=(self.n_tau, self.n_theta, self.n_phi))


def _parse_vector(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def parse_box_config(text: str) -> Box3:
    """Parse ``key = value`` lines (lower, upper, counts, optional y_ratio).

    Four entries per key produce a :class:`Box4`; ``#`` starts a comment.
    """
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GeometryError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key.lower()] = value
    missing = {"lower", "upper", "counts"} - entries.keys()
    if missing:
        raise GeometryError(f"missing keys: {sorted(missing)}")
    lower = _parse_vector(entries["lower"])
    upper = _parse_vector(entries["upper"])
    counts = [int(c) for c in _parse_vector(entries["counts"])]
    if len(lower) == 4:
        return Box4(lower, upper, counts, y_ratio=float(entries.get("y_ratio", 1.0)))
    return Box3(lower, upper, counts)


def format_box_config(box: Box3) -> str:
    def fmt(v):
        return ", ".join(repr(float(x)) for x in v)

    lines = [f"lower = {fmt(box.lower)}", f"upper = {fmt(box.upper)}",
             "counts = " + ", ".join(str(c) for c in box.counts)]
    if isinstance(box, Box4):
        lines.append(f"y_ratio = {box.y_ratio!r}")
    return "\n".join(lines) + "\n"


def read_box_config(path) -> Box3:
    return parse_box_config(Path(path).read_text())
