import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heisenkit.fields import GridField, SymbolicField, T, X, Y, polynomial_family
from heisenkit.grids import Box3, GeometryError
from heisenkit.io import read_csv
from heisenkit.levelset import (CharacteristicPointError, T_nu_v, default_eps_grad, export_frames_csv, lemma4_check,
                                level_frame, regular_points, regular_set)

pts3 = arrays(np.float64, 3, elements=st.floats(-2, 2))
FAMILY = polynomial_family(3, np.random.default_rng(7)) + [SymbolicField("exp(x1)*sin(x3) + x2*x3")]


@given(st.floats(0.2, 3.0), st.floats(0, 2 * np.pi), st.floats(-2, 2))
def test_x3_anchor(r, th, x3):
    # [DERIVED] u = x3: nu = (x2, -x1)/r, h = 0, p = 2/r
    P = np.array([r * np.cos(th), r * np.sin(th), x3])
    fr = level_frame(SymbolicField("x3"), P)
    assert fr.h == pytest.approx(0.0, abs=1e-9)
    assert fr.p == pytest.approx(2.0 / r, rel=1e-9)
    assert (fr.nu.alpha, fr.nu.beta) == pytest.approx((P[1] / r, -P[0] / r))
    # v is nu rotated by -90 degrees
    assert fr.v.alpha * fr.nu.alpha + fr.v.beta * fr.nu.beta == pytest.approx(0.0, abs=1e-12)


def test_paraboloid_curvature():
    # [DERIVED] u = x1^2 + x2^2: nu = x/r, h = div(x/r) = 1/r, p = 0
    u = SymbolicField("x1**2 + x2**2")
    fr = level_frame(u, np.array([0.6, 0.8, 5.0]))
    assert fr.h == pytest.approx(1.0)
    assert fr.p == pytest.approx(0.0, abs=1e-12)
    fr2 = level_frame(u, np.array([[0.0, 2.0, 0.0], [3.0, 0.0, 1.0]]))
    assert np.allclose(fr2.h, [0.5, 1 / 3])


def test_characteristic_point_rejected():
    u = SymbolicField("x3")
    with pytest.raises(CharacteristicPointError):
        level_frame(u, np.zeros(3))
    assert issubclass(CharacteristicPointError, GeometryError)
    mask, fr = regular_points(u, np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
    assert mask.tolist() == [False, True]
    assert np.allclose(fr.p, [2.0])


@given(pts3)
def test_pointwise_level_set_identities(P):
    for u in FAMILY:
        try:
            vals = lemma4_check(u, P)
        except CharacteristicPointError:
            continue
        e1, e2 = vals.relative_errors()
        assert e1 < 1e-8 and e2 < 1e-8


@given(pts3)
def test_T_nu_v_closed_form(P):
    # [DERIVED] <T nu, v> = (TXu Yu - TYu Xu) / G^2
    u = SymbolicField("x1*x3 + x2**3 - x3**2")
    G2 = X(u)(P) ** 2 + Y(u)(P) ** 2
    assume(G2 > 1e-4)
    closed = (T(X(u))(P) * Y(u)(P) - T(Y(u))(P) * X(u)(P)) / G2
    assert T_nu_v(u, P) == pytest.approx(closed, rel=1e-8, abs=1e-8)


def test_regular_set_and_grid_eps():
    g = Box3((-1, -1, -1), (1, 1, 1), (9, 9, 9)).grid()
    u = SymbolicField("x3")
    m = regular_set(u, g)
    # only the x3 axis (x1 = x2 = 0) is characteristic
    assert (~m.mask).sum() == 9
    gu = GridField.sample(u, g)
    # X X u needs two nodes on x1 and x3 only, so the max of G = 2r is taken over |x1| <= 0.5, |x2| <= 1
    assert default_eps_grad(gu) == pytest.approx(1e-2 * 2 * np.hypot(0.5, 1.0), rel=1e-9)
    assert (m & regular_set(gu)).sum() == m.mask.sum()
    with pytest.raises(GeometryError):
        regular_set(u)


def test_export_frames_csv(tmp_path):
    g = Box3((-1, -1, -1), (1, 1, 1), (3, 3, 3)).grid()
    path = export_frames_csv(tmp_path / "f.csv", SymbolicField("x3"), g)
    header, data = read_csv(path)
    cols = dict(zip(header, data.T))
    assert data.shape == (27, 9)
    mask = cols["mask"] > 0
    assert mask.sum() == 24
    assert np.all(np.isnan(cols["p"][~mask]))
    assert np.allclose(cols["h"][mask], 0.0, atol=1e-12)
