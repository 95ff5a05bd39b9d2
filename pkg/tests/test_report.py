from __future__ import annotations

import json
from fractions import Fraction

import pytest

from authmine import pipeline
from authmine.checkmining.mine import CheckSet
from authmine.config import load_config
from authmine.ir.model import MethodRef
from authmine.report import (
    build_exploration_dump,
    build_rule_reports,
    emit_rule_reports,
    render_rule_html,
    summarize_run,
)
from authmine.rulemine import mine_service

from conftest import FIXTURE_DIR, UMS


@pytest.fixture(scope="module")
def restriction_run():
    cfg = load_config(FIXTURE_DIR / "run.cfg").with_overrides(minconf="0.6")
    inputs = pipeline.load_inputs(cfg)
    analyses = pipeline.analyze_entries(inputs)
    check_sets = [a.check_set for a in analyses]
    return analyses, check_sets, pipeline.mine_rules(check_sets, cfg.minconf, cfg.minsup)


def entry(name: str, svc: str = "s.Svc") -> MethodRef:
    return MethodRef(svc, name, (), "void")


def synthetic(checks_by_entry: dict[str, set[str]], svc: str = "s.Svc") -> list[CheckSet]:
    return [CheckSet(entry(n, svc), tuple(sorted(c))) for n, c in checks_by_entry.items()]


def results_for(check_sets, minconf=Fraction(1, 2)):
    return pipeline.mine_rules(check_sets, minconf, "2/E")


def test_restriction_report_names_target_and_supporters(restriction_run, tmp_path):
    _, check_sets, results = restriction_run
    (report,) = build_rule_reports(results, check_sets)
    assert report.target.endswith("hasUserRestriction(java.lang.String,int)>")
    assert len(report.supporters) == 2
    assert report.confidence == "2/3"
    assert len(report.consequent) == 4
    # every listed check has at least one statement location in the code
    assert set(report.locations) == set(report.antecedent + report.consequent + report.extra)
    written = emit_rule_reports(results, check_sets, tmp_path, "json")
    assert [p.name for p in written] == ["rule-0001.json", "index.json"]
    index = json.loads((tmp_path / "index.json").read_text())
    assert index["services"][UMS] == {report.target: ["rule-0001"]}


def test_zero_rules_give_empty_index(tmp_path):
    check_sets = synthetic({"a": {"x"}, "b": {"y"}})
    written = emit_rule_reports(results_for(check_sets), check_sets, tmp_path)
    assert [p.name for p in written] == ["index.json"]
    assert json.loads(written[0].read_text()) == {"rules": 0, "services": {}}


def test_three_rules_for_one_target(tmp_path):
    # target t holds only x; three disjoint supporter pairs each add a check
    check_sets = synthetic({
        "t": {"x"},
        "a1": {"x", "p"}, "a2": {"x", "p"},
        "b1": {"x", "q"}, "b2": {"x", "q"},
        "c1": {"x", "r"}, "c2": {"x", "r"},
    })
    results = pipeline.mine_rules(check_sets, Fraction(1, 4), "2/E")
    rules = [r for res in results for r in res.rules if r.target == entry("t").signature]
    assert len(rules) == 3
    written = emit_rule_reports(results, check_sets, tmp_path, "html")
    index = (tmp_path / "index.html").read_text()
    assert len(written) == sum(len(res.rules) for res in results) + 1
    assert index.count(entry("t").signature.replace("<", "&lt;").replace(">", "&gt;")) == 1


def test_html_escapes_signatures():
    check_sets = synthetic({"a": {'CP["<x>" ; 1]', "k"}, "b": {'CP["<x>" ; 1]', "k"}, "c": {"k"}})
    (report,) = build_rule_reports(results_for(check_sets), check_sets)
    page = render_rule_html(report)
    assert "<x>" not in page.replace("<html>", "")
    assert "CP[&quot;&lt;x&gt;&quot; ; 1]" in page


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_rule_reports([], [], tmp_path, "pdf")


def test_exploration_dump(restriction_run):
    analyses, _, _ = restriction_run
    dump = build_exploration_dump(pipeline.all_candidates(analyses))
    assert set(dump) == {"strings", "fields", "methods_used", "methods_containing"}
    used = {e["name"]: e for e in dump["methods_used"]}
    valid = next(k for k in used if "isValidRestriction" in k)
    # one shared conditional per entry point that calls isValidRestriction
    assert used[valid]["count"] >= 2
    assert all(len(e["sites"]) <= 5 for lst in dump.values() for e in lst)
    assert build_exploration_dump([]) == {k: [] for k in dump}


def test_exploration_counts_shared_conditionals_once(restriction_run):
    analyses, _, _ = restriction_run
    cands = pipeline.all_candidates(analyses)
    once = build_exploration_dump(cands)
    twice = build_exploration_dump(list(cands) + list(cands))
    assert once == twice


def test_summary_restriction_fixture(restriction_run):
    _, check_sets, results = restriction_run
    assert summarize_run(check_sets, results).as_tuple() == (3, 3, 1)
    assert summarize_run([], []).as_tuple() == (0, 0, 0)


def test_summary_excludes_unchecked_entry_points():
    check_sets = synthetic({"a": {"x", "y"}, "b": {"x", "y"}, "c": {"x"}, "d": set()})
    s = summarize_run(check_sets, results_for(check_sets))
    assert s.as_tuple() == (4, 3, 1)
    assert s.to_dict() == {"entry_points": 4, "with_checks": 3, "with_rules": 1}


def test_reports_are_ordered_by_service():
    a = synthetic({"a": {"x", "y"}, "b": {"x", "y"}, "c": {"x"}}, "z.Svc")
    b = synthetic({"a": {"x", "y"}, "b": {"x", "y"}, "c": {"x"}}, "a.Svc")
    results = [mine_service("z.Svc", [(cs.entry.signature, cs.checks) for cs in a], Fraction(1, 2)),
               mine_service("a.Svc", [(cs.entry.signature, cs.checks) for cs in b], Fraction(1, 2))]
    reports = build_rule_reports(results, a + b)
    assert [r.service for r in reports] == ["a.Svc", "z.Svc"]
    assert [r.rule_id for r in reports] == ["rule-0001", "rule-0002"]
