"""Intrinsic geometry of level sets at non-characteristic points.

For G = |grad_H u| > 0 the frame is nu = (Xu, Yu)/G, v = (Yu, -Xu)/G, the mean
curvature is h = div_H nu (the normalized field is differentiated, not an
expanded formula) and the imaginary curvature is p = -Tu/G.  T nu means T
applied to each frame coefficient of nu.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (GridField, HorizontalVector, ScalarField, SymbolicField, T, X, Y,
                     horizontal_hessian, pointwise)
from .grids import GeometryError, TensorGrid
from .io import write_csv

EPS_GRAD_CLOSED = 1e-6
EPS_GRAD_REL = 1e-2


class CharacteristicPointError(GeometryError):
    """The horizontal gradient vanishes (below eps_grad) at a requested point."""


@dataclass
class LevelSetFrame:
    nu: HorizontalVector
    v: HorizontalVector
    h: np.ndarray
    p: np.ndarray
    grad_norm: np.ndarray


@dataclass
class RegularSetMask:
    mask: np.ndarray
    eps_grad: float

    def __and__(self, other):
        return np.logical_and(self.mask, other.mask if isinstance(other, RegularSetMask) else other)


def frame_fields(u: ScalarField) -> dict:
    """Fields G, nu1, nu2, h, p, T nu1, T nu2 (cached on ``u``)."""
    cache = u.__dict__.setdefault("_frame_cache", {})
    if not cache:
        xu, yu = X(u), Y(u)
        G = pointwise(lambda xp, a, b: xp.sqrt(a * a + b * b), xu, yu)
        nu1 = pointwise(lambda xp, a, b: a / xp.sqrt(a * a + b * b), xu, yu)
        nu2 = pointwise(lambda xp, a, b: b / xp.sqrt(a * a + b * b), xu, yu)
        cache.update(
            G=G, nu1=nu1, nu2=nu2,
            h=pointwise(lambda xp, a, b: a + b, X(nu1), Y(nu2)),
            p=pointwise(lambda xp, t, g: -t / g, T(u), G),
            Tnu1=T(nu1), Tnu2=T(nu2),
        )
    return cache


def default_eps_grad(u: ScalarField) -> float:
    """1e-6 for closed-form fields; 1e-2 max |grad_H u| over the valid nodes of a grid field."""
    if isinstance(u, GridField):
        xu, yu = X(u), Y(u)
        sl = tuple(slice(m0, n - m1) for (m0, m1), n in zip(X(X(u)).margins, u.grid.shape))
        return float(EPS_GRAD_REL * np.nanmax(np.hypot(xu.values[sl], yu.values[sl])))
    return EPS_GRAD_CLOSED


def _grad_norm(u, pts):
    return np.hypot(X(u)(pts), Y(u)(pts))


def level_frame(u: ScalarField, P, eps_grad: float | None = None) -> LevelSetFrame:
    """Frame at ``P`` (one point or an array of points); raises at characteristic points."""
    eps = default_eps_grad(u) if eps_grad is None else eps_grad
    pts = np.asarray(P, dtype=float)
    G = _grad_norm(u, pts)
    if np.any(~(G > eps)):
        raise CharacteristicPointError(f"|grad_H u| = {np.min(G):.3e} <= eps_grad = {eps:.1e}")
    ff = frame_fields(u)
    xu, yu = X(u)(pts), Y(u)(pts)
    nu = HorizontalVector(xu / G, yu / G, pts)
    v = HorizontalVector(yu / G, -xu / G, pts)
    frame = LevelSetFrame(nu, v, ff["h"](pts), ff["p"](pts), G)
    if pts.ndim == 1:
        frame = LevelSetFrame(HorizontalVector(float(nu.alpha), float(nu.beta), pts),
                              HorizontalVector(float(v.alpha), float(v.beta), pts),
                              float(frame.h), float(frame.p), float(G))
    return frame


def regular_points(u: ScalarField, pts, eps_grad: float | None = None):
    """Split points into (mask, frame at the non-characteristic ones)."""
    eps = default_eps_grad(u) if eps_grad is None else eps_grad
    pts = np.asarray(pts, dtype=float)
    mask = _grad_norm(u, pts) > eps
    return mask, level_frame(u, pts[mask], eps)


@dataclass
class Lemma4Values:
    lhs1: np.ndarray
    rhs1: np.ndarray
    lhs2: np.ndarray
    rhs2: np.ndarray

    def __iter__(self):
        return iter((self.lhs1, self.rhs1, self.lhs2, self.rhs2))

    def relative_errors(self):
        def rel(a, b):
            scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
            return np.abs(a - b) / scale
        return rel(self.lhs1, self.rhs1), rel(self.lhs2, self.rhs2)


def lemma4_terms(u: ScalarField, P, eps_grad: float | None = None) -> dict:
    """Pointwise pieces shared by the identity check and the geometric-inequality integrands."""
    fr = level_frame(u, P, eps_grad)
    ff = frame_fields(u)
    pts = np.asarray(P, dtype=float)
    H = horizontal_hessian(u, pts)
    nu, v, G = fr.nu, fr.v, fr.grad_norm
    Mv = H.matvec(v)
    huv_nu = Mv.dot(nu)
    # (Hu)(Hu)^T nu . nu = |Hu^T nu|^2
    mt_nu = (H.xx * nu.alpha + H.xy * nu.beta, H.yx * nu.alpha + H.yy * nu.beta)
    hh_nu_nu = mt_nu[0] ** 2 + mt_nu[1] ** 2
    xu, yu = X(u)(pts), Y(u)(pts)
    txu, tyu = T(X(u))(pts), T(Y(u))(pts)
    tnu_v = ff["Tnu1"](pts) * v.alpha + ff["Tnu2"](pts) * v.beta
    return dict(frame=fr, hess=H, huv_nu=huv_nu, hess_sq=H.norm_sq, hh_nu_nu=hh_nu_nu,
                comm=tyu * xu - txu * yu, tnu_v=tnu_v, tnu_v_closed=(txu * yu - tyu * xu) / G ** 2)


def lemma4_check(u: ScalarField, P, eps_grad: float | None = None) -> Lemma4Values:
    t = lemma4_terms(u, P, eps_grad)
    fr = t["frame"]
    G = fr.grad_norm
    lhs1 = t["hess_sq"] - t["hh_nu_nu"]
    rhs1 = G ** 2 * (fr.h ** 2 + (fr.p + t["huv_nu"] / G) ** 2)
    return Lemma4Values(lhs1, rhs1, t["comm"], -G ** 2 * t["tnu_v"])


def T_nu_v(u: ScalarField, P, eps_grad: float | None = None):
    """<T nu, v>_H through the differentiated frame."""
    t = lemma4_terms(u, P, eps_grad)
    return t["tnu_v"]


def regular_set(u: ScalarField, grid: TensorGrid | None = None, eps_grad: float | None = None) -> RegularSetMask:
    """Nodes where |grad_H u| > eps_grad.

    Grid fields use their own samples (edge nodes carry one-sided
    differences); other fields are evaluated on ``grid``.
    """
    eps = default_eps_grad(u) if eps_grad is None else eps_grad
    if isinstance(u, GridField):
        G = np.hypot(X(u).values, Y(u).values)
    else:
        if grid is None:
            raise GeometryError("a grid is needed to build the mask of a non-grid field")
        G = _grad_norm(u, grid.points())
    return RegularSetMask(G > eps, eps)


def export_frames_csv(path, u: ScalarField, grid: TensorGrid, eps_grad: float | None = None):
    """Per node: coordinates, nu1, nu2, h, p, grad_norm, mask (NaN off the regular set)."""
    pts = grid.points().reshape(-1, grid.dim)
    eps = default_eps_grad(u) if eps_grad is None else eps_grad
    G = _grad_norm(u, pts)
    mask = G > eps
    cols = {k: np.full(pts.shape[0], np.nan) for k in ("nu1", "nu2", "h", "p")}
    if mask.any():
        fr = level_frame(u, pts[mask], eps)
        cols["nu1"][mask], cols["nu2"][mask] = fr.nu.alpha, fr.nu.beta
        cols["h"][mask], cols["p"][mask] = fr.h, fr.p
    names = ["x1", "x2", "x3", "y"][:grid.dim]
    return write_csv(path, names + ["nu1", "nu2", "h", "p", "grad_norm", "mask"],
                     [*pts.T, cols["nu1"], cols["nu2"], cols["h"], cols["p"], G, mask])


__all__ = ["CharacteristicPointError", "LevelSetFrame", "RegularSetMask", "Lemma4Values", "SymbolicField",
           "frame_fields", "level_frame", "regular_points", "lemma4_check", "lemma4_terms", "T_nu_v",
           "regular_set", "export_frames_csv", "default_eps_grad"]
