"""Rule reports for triage, exploration dumps, and run summaries."""

from __future__ import annotations

import html
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .checkmining.mine import CheckSet
from .cpfilter import FIELD, METHOD_RETURN, STRING_CONST, ConditionalCandidate
from .rulemine import AssociationRule, ServiceResult

SAMPLE_SITES = 5


def _frac(f) -> str:
    return f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class RuleReport:
    rule_id: str
    service: str
    target: str
    supporters: tuple[str, ...]
    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]
    extra: tuple[str, ...]
    confidence: str
    support: str
    locations: dict[str, tuple[str, ...]]

    def to_dict(self) -> dict:
        return {
            "id": self.rule_id,
            "service": self.service,
            "target": self.target,
            "supporters": list(self.supporters),
            "antecedent": list(self.antecedent),
            "consequent": list(self.consequent),
            "extra": list(self.extra),
            "confidence": self.confidence,
            "support": self.support,
            "locations": {k: list(v) for k, v in sorted(self.locations.items())},
        }


def build_rule_reports(results: Iterable[ServiceResult], check_sets: Iterable[CheckSet]
                       ) -> list[RuleReport]:
    by_entry = {cs.entry.signature: cs for cs in check_sets}
    reports = []
    rules: list[tuple[str, AssociationRule]] = []
    for res in sorted(results, key=lambda r: r.service):
        rules.extend((res.service, r) for r in res.rules)
    for n, (service, rule) in enumerate(rules, 1):
        target_checks = set(by_entry[rule.target].checks) if rule.target in by_entry else set()
        extra = tuple(sorted(target_checks - set(rule.antecedent)))
        locations: dict[str, set[str]] = defaultdict(set)
        for entry in (rule.target,) + rule.supporters:
            cs = by_entry.get(entry)
            if cs is None:
                continue
            for check in rule.antecedent + rule.consequent + extra:
                for site in cs.provenance.get(check, ()):
                    locations[check].add(site.method.signature)
        reports.append(RuleReport(
            rule_id=f"rule-{n:04d}",
            service=service,
            target=rule.target,
            supporters=rule.supporters,
            antecedent=rule.antecedent,
            consequent=rule.consequent,
            extra=extra,
            confidence=_frac(rule.confidence),
            support=_frac(rule.support),
            locations={k: tuple(sorted(v)) for k, v in locations.items()},
        ))
    return reports


_CSS = """
body { font-family: sans-serif; margin: 2em; color: #222; }
h1 { font-size: 1.3em; }
h2 { font-size: 1.05em; margin-top: 1.5em; }
code, li { font-family: monospace; font-size: 0.9em; }
.meta td { padding: 2px 12px 2px 0; }
.consequent li { color: #9a1b1b; }
.loc { color: #666; font-size: 0.85em; }
"""


def _page(title: str, body: str) -> str:
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title><style>{_CSS}</style></head>\n"
        f"<body>\n{body}\n</body></html>\n"
    )


def _check_list(checks: Sequence[str], locations: Mapping[str, Sequence[str]], cls: str = "") -> str:
    if not checks:
        return "<p><em>none</em></p>"
    items = []
    for c in checks:
        locs = "".join(f"<div class=\"loc\">{html.escape(m)}</div>" for m in locations.get(c, ()))
        items.append(f"<li><code>{html.escape(c)}</code>{locs}</li>")
    attr = f" class=\"{cls}\"" if cls else ""
    return f"<ul{attr}>" + "".join(items) + "</ul>"


def render_rule_html(r: RuleReport) -> str:
    meta = "".join(
        f"<tr><td>{html.escape(k)}</td><td><code>{html.escape(v)}</code></td></tr>"
        for k, v in (("service", r.service), ("target", r.target),
                     ("confidence", r.confidence), ("support", r.support))
    )
    supporters = "".join(f"<li>{html.escape(s)}</li>" for s in r.supporters)
    body = (
        f"<h1>{html.escape(r.rule_id)}</h1>\n<table class=\"meta\">{meta}</table>\n"
        f"<h2>Supporting entry points ({len(r.supporters)})</h2><ul>{supporters}</ul>\n"
        f"<h2>Antecedent (shared with the target)</h2>{_check_list(r.antecedent, r.locations)}\n"
        f"<h2>Recommended checks missing from the target</h2>"
        f"{_check_list(r.consequent, r.locations, 'consequent')}\n"
        f"<h2>Checks only in the target</h2>{_check_list(r.extra, r.locations)}"
    )
    return _page(r.rule_id, body)


def _index(reports: Sequence[RuleReport]) -> dict:
    groups: dict[str, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for r in reports:
        groups[r.service][r.target].append(r.rule_id)
    return {
        "rules": len(reports),
        "services": {
            svc: {t: ids for t, ids in sorted(targets.items())}
            for svc, targets in sorted(groups.items())
        },
    }


def emit_rule_reports(results: Iterable[ServiceResult], check_sets: Iterable[CheckSet],
                      out_dir: str | Path, fmt: str = "json") -> list[Path]:
    """One document per rule plus an index grouped by service and target."""
    if fmt not in ("json", "html"):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = build_rule_reports(results, check_sets)
    written = []
    for r in reports:
        path = out / f"{r.rule_id}.{fmt}"
        if fmt == "json":
            path.write_text(json.dumps(r.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                            encoding="utf-8")
        else:
            path.write_text(render_rule_html(r), encoding="utf-8")
        written.append(path)
    index = _index(reports)
    index_path = out / f"index.{fmt}"
    if fmt == "json":
        index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        parts = [f"<h1>Inconsistency reports ({index['rules']} rules)</h1>"]
        for svc, targets in index["services"].items():
            parts.append(f"<h2>{html.escape(svc)}</h2><ul>")
            for target, ids in targets.items():
                links = ", ".join(f"<a href=\"{i}.html\">{i}</a>" for i in ids)
                parts.append(f"<li><code>{html.escape(target)}</code>: {links}</li>")
            parts.append("</ul>")
        index_path.write_text(_page("Inconsistency reports", "\n".join(parts)), encoding="utf-8")
    written.append(index_path)
    return written


# ---------------------------------------------------------------------------
# Exploration dump
# ---------------------------------------------------------------------------

EXPLORATION_LISTS = ("strings", "fields", "methods_used", "methods_containing")


def build_exploration_dump(candidates: Iterable[ConditionalCandidate]) -> dict:
    """Counts are over distinct (conditional, element) pairs, so a
    conditional shared by several entry points is counted once."""
    pairs: dict[str, set[tuple[str, str]]] = {name: set() for name in EXPLORATION_LISTS}
    list_of = {STRING_CONST: "strings", FIELD: "fields", METHOD_RETURN: "methods_used"}
    for cand in candidates:
        site = str(cand.stmt)
        pairs["methods_containing"].add((cand.method.signature, site))
        for e in cand.elements:
            pairs[list_of[e.kind]].add((e.key, site))
    dump = {}
    for name in EXPLORATION_LISTS:
        sites: dict[str, list[str]] = defaultdict(list)
        for key, site in pairs[name]:
            sites[key].append(site)
        dump[name] = [
            {"name": key, "count": len(s), "sites": sorted(s)[:SAMPLE_SITES]}
            for key, s in sorted(sites.items())
        ]
    return dump


def emit_exploration_dump(candidates: Iterable[ConditionalCandidate], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "exploration.json"
    path.write_text(json.dumps(build_exploration_dump(candidates), indent=2, sort_keys=True,
                               ensure_ascii=False) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    entry_points: int
    with_checks: int
    with_rules: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.entry_points, self.with_checks, self.with_rules)

    def to_dict(self) -> dict:
        return {"entry_points": self.entry_points, "with_checks": self.with_checks,
                "with_rules": self.with_rules}


def summarize_run(check_sets: Iterable[CheckSet], results: Iterable[ServiceResult]) -> RunSummary:
    check_sets = list(check_sets)
    targets = {r.target for res in results for r in res.rules}
    return RunSummary(
        entry_points=len(check_sets),
        with_checks=sum(1 for cs in check_sets if cs.checks),
        with_rules=sum(1 for cs in check_sets if cs.entry.signature in targets),
    )
