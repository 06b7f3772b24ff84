from __future__ import annotations

import json

import pytest

from focmod import difftest as D


def test_route_names():
    assert D.route_name("eval=lower") == "eval≡lower"
    assert D.route_name("sscm==logic") == "sscm≡logic"
    with pytest.raises(ValueError):
        D.route_name("eval≡upper")


def test_fixture_library():
    names = [n for n, _ in D.fixture_sentences()]
    assert names == ["alt01", "item1_all_same", "item2_alternating", "item3_equal_counts", "item4_twice",
                     "majority"]


def test_eval_normal_route_passes():
    report = D.run_route("eval≡normal", 5, sentences=D.fixture_sentences())
    assert report.passed and report.strings == 6 * 63
    assert report.to_json()["totals"]["mismatches"] == 0


def test_eval_lower_route_with_margins():
    report = D.run_route("eval≡lower", 6, sentences=D.fixture_sentences())
    assert report.passed
    assert report.stats["max_margin_error"] < D.MARGIN_TOL


def test_fault_injection_is_detected():
    report = D.run_route("eval≡lower", 3, sentences=D.fixture_sentences()[:1], fault=D.negate_output)
    assert not report.passed and len(report.mismatches) == 15
    assert report.minimal() == {"alt01": ""}
    data = report.to_json()
    assert data["passed"] is False and data["minimal_counterexamples"] == {"alt01": ""}


def test_uplift_route_and_budget():
    report = D.run_route("fixedexec≡uplift", 4, models=D.random_models(2, seed=3))
    assert report.passed
    assert report.stats["max_nodes"] <= report.stats["node_budget"] == D.NODE_BUDGET
    bad = D.run_route("fixedexec≡uplift", 3, models=D.random_models(1, seed=3), fault=D.negate_output)
    assert not bad.passed


def test_sscm_routes():
    machines = D.random_machines(4, seed=1)
    assert D.run_route("sscm≡logic", 5, machines=machines).passed
    assert D.run_route("sscm≡lower", 4, machines=machines).passed


def test_reports_are_byte_identical():
    a = D.run_route("sscm≡logic", 4, machines=D.random_machines(3, seed=5)).dumps()
    b = D.run_route("sscm≡logic", 4, machines=D.random_machines(3, seed=5)).dumps()
    assert a == b
    assert json.loads(a)["route"] == "sscm≡logic"


def test_random_models_are_deterministic():
    a = [m.dumps() for _, m in D.random_models(3, seed=7)]
    b = [m.dumps() for _, m in D.random_models(3, seed=7)]
    assert a == b
    for _, m in D.random_models(10, seed=7):
        assert m.d <= 4 and len(m.layers) <= 2
        assert all(len(layer.heads) == 1 and len(layer.heads[0].wq) <= 2 for layer in m.layers)
