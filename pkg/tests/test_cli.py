import json
import subprocess
import sys

import numpy as np
import pytest

from heisenkit.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main
from heisenkit.io import load_grid_binary

SMALL_PROBLEM = {"box": {"lower": [-1, -1, -1, 0], "upper": [1, 1, 1, 1], "counts": [7, 7, 7, 5]},
                 "s": 0.5, "nonlinearity": "allen_cahn", "boundary_data": "tanh(2*x1 + x2*x3)"}


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["verify", "nosuch", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["verify", "group", "--config", _write(tmp_path, "bad.json", "{oops"), "--out", str(tmp_path)]) \
        == EXIT_USAGE
    assert main(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["solve", "--config", _write(tmp_path, "np.json", {"method": "descent"}), "--out", str(tmp_path)]) \
        == EXIT_USAGE
    assert main(["verify", "group", "--tol-scale", "0", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["verify", "lemma5", "--config", _write(tmp_path, "q.json", {"q": 0}), "--out", str(tmp_path)]) \
        == EXIT_USAGE


def test_verify_writes_reports(tmp_path):
    assert main(["verify", "group", "--out", str(tmp_path), "--seed", "2"]) == EXIT_PASS
    rep = json.loads((tmp_path / "verify_group.json").read_text())
    assert rep["passed"] and rep["suite"] == "group" and "eq:2-1a" in rep["eq"]
    assert rep["config"]["seed"] == 2


def test_verify_failure_exit_code(tmp_path):
    # shrinking every tolerance to nothing turns rounding-level residuals into failures
    assert main(["verify", "group", "--tol-scale", "1e-30", "--out", str(tmp_path)]) == EXIT_FAIL


def test_solve_and_rigidity_chain(tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", "--config", _write(tmp_path, "s.json", {"problem": SMALL_PROBLEM}), "--out", str(out)]) \
        == EXIT_PASS
    vals, grid = load_grid_binary(out / "solution.bin")
    assert vals.shape == (7, 7, 7, 5) and np.abs(vals).max() <= 1 + 1e-9
    rep = json.loads((out / "solve.json").read_text())
    assert rep["energy_monotone"] and rep["residual"] < 1e-8
    assert (out / "energy.svg").read_text().startswith("<svg")
    prov = json.loads((out / "provenance.json").read_text())
    assert {"solution.bin", "energy.csv", "solve.json"} <= set(prov["artifacts"])

    rcfg = {"solution": str(out / "solution.bin"), "a": 0.0,
            "phi": {"center": [0, 0, 0, 0], "radii": [0.5, 0.5, 0.5, 0.6]}}
    rout = tmp_path / "rig"
    code = main(["rigidity", "--config", _write(tmp_path, "r.json", rcfg), "--out", str(rout)])
    rep = json.loads((rout / "rigidity.json").read_text())
    assert code == (EXIT_PASS if rep["holds"] else EXIT_FAIL)
    assert rep["eq"] == "eq:1-7" and rep["energy_profile"]["eq"] == "eq:1-8"
    assert "tnu_v" in rep["inequality"]
    assert (rout / "energy_profile.csv").exists()


def test_solve_constant_exact(tmp_path):
    prob = dict(SMALL_PROBLEM, nonlinearity="zero", boundary_data="0.25 + 0*x1")
    assert main(["solve", "--config", _write(tmp_path, "c.json", {"problem": prob, "method": "newton"}),
                 "--out", str(tmp_path)]) == EXIT_PASS
    vals, _ = load_grid_binary(tmp_path / "solution.bin")
    assert np.max(np.abs(vals - 0.25)) < 1e-10


def test_curvature_expression(tmp_path):
    cfg = {"u": "x3", "box": {"lower": [-1, -1, -1], "upper": [1, 1, 1], "counts": [5, 5, 5]}}
    assert main(["curvature", "--config", _write(tmp_path, "k.json", cfg), "--out", str(tmp_path)]) == EXIT_PASS
    rep = json.loads((tmp_path / "curvature.json").read_text())
    assert rep["n_nodes"] == 125 and rep["n_regular"] == 120
    assert rep["h"]["max"] == pytest.approx(0.0, abs=1e-9)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "heisenkit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("heisenkit")
    r = subprocess.run([sys.executable, "-m", "heisenkit", "verify", "nosuch", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_USAGE
