"""Acceptance criteria 1-9, each at its stated tolerance.

Every criterion prints one PASS/FAIL line; the same lines are repeated in
the pytest terminal summary.
"""
import json

import numpy as np
import pytest

from heisenkit.cli import main
from heisenkit.io import dumps_json
from heisenkit.verify import run_suite

_CACHE = {}


def suite(name):
    if name not in _CACHE:
        _CACHE[name] = run_suite(name, seed=0)
    return _CACHE[name]


def _summary(rep, keys):
    by = {c.name: c for c in rep.checks}
    return "  ".join(f"{k}={by[k].value:.3g}" for k in keys if k in by)


def _criterion(record, n, names, keys, extra=lambda reps: ""):
    reps = [suite(s) for s in names]
    passed = all(r.passed for r in reps)
    fails = [f for r in reps for f in r.failures()]
    detail = "  ".join(_summary(r, keys) for r in reps) + extra(reps)
    record(n, passed, detail + (f"  failing: {fails}" if fails else ""))
    assert passed, fails
    return reps


def test_criterion_1_group(acceptance_log):
    _criterion(acceptance_log, 1, ["group"], ["associativity", "identity", "inverse", "dilation_automorphism",
                                              "gauge_homogeneity"])


def test_criterion_2_operators(acceptance_log):
    (rep,) = _criterion(acceptance_log, 2, ["operators"], ["commutator_order_min", "left_invariance"])
    assert sum(c.name.startswith("commutator_closed_form") for c in rep.checks) >= 5


def test_criterion_3_level_set_identities(acceptance_log):
    _criterion(acceptance_log, 3, ["lemma4"], ["identity1_relerr", "identity2_relerr", "regular_points",
                                              "anchor_x3_lhs1", "anchor_x3_rhs1"])


def test_criterion_4_integration_by_parts(acceptance_log):
    def pick(rep, prefix):
        return [c.value for c in rep.checks if c.name.startswith(prefix)]

    def extra(reps):
        return f"max_base_relerr={max(pick(reps[0], 'relerr_base')):.3g}  min_order={min(pick(reps[0], 'order')):.3g}"

    (rep,) = _criterion(acceptance_log, 4, ["lemma3"], [], extra)
    base, order = pick(rep, "relerr_base"), pick(rep, "order")
    assert base and order
    assert max(base) <= 1e-3 and min(order) >= 1.9


def test_criterion_5_kernels(acceptance_log):
    _criterion(acceptance_log, 5, ["kernels"], ["heat_mass_defect", "heat_homogeneity", "heat_semigroup",
                                               "poisson_min_value", "poisson_mass", "poisson_scaling",
                                               "poisson_decay_slope"])


def test_criterion_6_fractional(acceptance_log):
    _criterion(acceptance_log, 6, ["fractional"], ["constant_maps_to_zero", "dilation_covariance", "dtn_cv",
                                                  "dtn_points_used"])


def test_criterion_7_extension(acceptance_log):
    _criterion(acceptance_log, 7, ["extension"], ["linear_vs_lift_sup", "weak_residual_order",
                                                 "weak_residual_C_spread"])


def test_criterion_8_rigidity(acceptance_log):
    def extra(reps):
        d = reps[0].data.get("closed_form", {})
        return "".join(f"  {k}={d[k]:.4g}" for k in ("lhs_over_c5", "rhs_over_c5") if k in d)

    l5, ineq = _criterion(acceptance_log, 8, ["lemma5", "inequality17"],
                          ["closed_form_lhs_over_c5", "closed_form_rhs_over_c5", "random_fields_lhs_minus_rhs",
                           "cutoff_gradient_vs_fd", "stable_margin_over_scale"], extra)
    tnu = ineq.data["stable_solution"]["tnu_v"]
    assert {"min", "max", "weighted_integral", "fraction_nonnegative"} <= set(tnu)


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(acceptance_log, tmp_path):
    same = []
    for name in ("group", "lemma4", "operators"):
        a = dumps_json(run_suite(name, seed=11).as_dict())
        b = dumps_json(run_suite(name, seed=11).as_dict())
        same.append(a == b)
    cfg = tmp_path / "curv.json"
    cfg.write_text(json.dumps({"u": "x1**2 + x2*x3", "box": {"lower": [-1, -1, -1], "upper": [1, 1, 1],
                                                             "counts": [7, 7, 7]}}))
    trees = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["verify", "group", "--seed", "5", "--out", str(out)]) == 0
        assert main(["curvature", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
        trees.append(_tree_bytes(out))
    same.append(trees[0] == trees[1] and len(trees[0]) >= 3)
    ok = all(same)
    acceptance_log(9, ok, f"suite reports identical: {same[:3]}  CLI artifacts identical: {same[3]}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
