import json

import pytest

from heisenkit.io import dumps_json
from heisenkit.verify import SUITES, Check, run_suite


def test_check_relations():
    assert Check("a", 1e-9, 1e-8).passed
    assert not Check("a", 1e-7, 1e-8).passed
    assert Check("b", 2.0, 1.9, ">=").passed
    assert not Check("nan", float("nan"), 1.0).passed


def test_registry_and_unknown_suite():
    assert {"group", "operators", "lemma3", "lemma4", "kernels", "lemma5", "inequality17"} <= set(SUITES)
    with pytest.raises(KeyError):
        run_suite("nosuch")


def test_report_structure_and_tol_scale():
    rep = run_suite("group", seed=1)
    d = json.loads(dumps_json(rep.as_dict()))
    assert d["passed"] and d["suite"] == "group" and d["eq"] == ["eq:2-1a", "eq:4-1"]
    assert all({"name", "value", "tol", "passed"} <= set(c) for c in d["checks"])
    tight = run_suite("group", seed=1, tol_scale=1e-30)
    assert not tight.passed and tight.failures()


def test_seed_changes_samples():
    a = run_suite("group", seed=1).as_dict()["checks"]
    b = run_suite("group", seed=2).as_dict()["checks"]
    assert [c["value"] for c in a] != [c["value"] for c in b]
