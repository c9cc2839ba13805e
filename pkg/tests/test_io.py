import numpy as np
import pytest

from heisenkit.grids import Box3, Box4, GeometryError
from heisenkit.io import (dumps_json, load_grid_binary, load_grid_csv, read_csv, save_grid_binary, save_grid_csv,
                          write_csv)


def test_binary_roundtrip_uniform(tmp_path):
    g = Box3((-1, -1, -2), (1, 1, 2), (4, 5, 6)).grid()
    v = np.random.default_rng(0).normal(size=g.shape)
    save_grid_binary(tmp_path / "a.bin", v, g)
    w, g2 = load_grid_binary(tmp_path / "a.bin")
    assert np.array_equal(v, w)
    assert all(np.allclose(a, b) for a, b in zip(g.axes, g2.axes))


def test_binary_roundtrip_graded_axis(tmp_path):
    g = Box4((0, 0, 0, 0), (1, 1, 1, 1), (3, 3, 3, 6), y_ratio=1.2).grid()
    v = np.arange(np.prod(g.shape), dtype=float).reshape(g.shape)
    save_grid_binary(tmp_path / "b.bin", v, g)
    w, g2 = load_grid_binary(tmp_path / "b.bin")
    assert np.array_equal(v, w) and np.array_equal(g.axes[3], g2.axes[3])


def test_binary_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"not a grid")
    with pytest.raises(GeometryError):
        load_grid_binary(tmp_path / "x.bin")
    with pytest.raises(GeometryError):
        save_grid_binary(tmp_path / "y.bin", np.zeros(3), Box3((0, 0, 0), (1, 1, 1), (2, 2, 2)).grid())


def test_csv_roundtrip(tmp_path):
    g = Box3((0, 0, 0), (1, 2, 3), (2, 3, 4)).grid()
    v = np.random.default_rng(1).uniform(size=g.shape)
    save_grid_csv(tmp_path / "g.csv", v, g)
    w, g2 = load_grid_csv(tmp_path / "g.csv")
    assert np.array_equal(v, w) and g2.shape == g.shape
    write_csv(tmp_path / "t.csv", ["a", "flag"], [[1.5, 2.5], [True, False]])
    head, data = read_csv(tmp_path / "t.csv")
    assert head == ["a", "flag"] and data.tolist() == [[1.5, 1.0], [2.5, 0.0]]


def test_json_is_deterministic_and_handles_numpy():
    obj = {"b": np.float64(0.1), "a": np.arange(3), "c": np.bool_(True), "d": float("nan")}
    s = dumps_json(obj)
    assert s == dumps_json(dict(reversed(list(obj.items()))))
    assert '"a": [\n    0,' in s and '"d": "nan"' in s
