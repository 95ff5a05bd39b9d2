"""Per-entry-point check mining: marking, filtering and value expansion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..callgraph import CallGraph, ExcludeList, build_cha_callgraph
from ..cpfilter import (
    ConditionalCandidate,
    FilterSpec,
    collect_candidate,
    detect_loop_conditionals,
    evaluate_filter,
)
from ..ir.cfg import build_cfg
from ..ir.model import MethodRef, StmtRef, parse_method_signature
from ..ir.program import Program
from .marking import (
    DEFAULT_SECURITY_EXCEPTION,
    conditionals_using,
    cq_call_sites,
    find_security_throws,
    forward_defuse_cq_returns,
    forward_uses,
    mark_backward_cps,
    mark_cq_internal_cps,
)
from .values import ValueResolver, conditional_checks, invocation_checks


@dataclass(frozen=True)
class CheckSet:
    entry: MethodRef
    checks: tuple[str, ...]
    provenance: dict[str, tuple[StmtRef, ...]] = field(default_factory=dict)

    @property
    def service(self) -> str:
        return self.entry.class_name

    def __len__(self) -> int:
        return len(self.checks)

    def to_dict(self) -> dict:
        return {
            "entry": self.entry.signature,
            "service": self.service,
            "checks": list(self.checks),
            "provenance": {
                c: [{"method": s.method.signature, "stmt": s.index} for s in self.provenance.get(c, ())]
                for c in self.checks
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CheckSet":
        checks = tuple(sorted(data["checks"]))
        prov = {
            c: tuple(sorted(StmtRef(parse_method_signature(p["method"]), int(p["stmt"]))
                            for p in data.get("provenance", {}).get(c, ())))
            for c in checks
        }
        return cls(parse_method_signature(data["entry"]), checks, prov)


def checksets_to_json(check_sets: Iterable[CheckSet]) -> str:
    items = sorted(check_sets, key=lambda cs: cs.entry)
    return json.dumps([cs.to_dict() for cs in items], indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def checksets_from_json(text: str) -> list[CheckSet]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("check-set document must be a JSON list")
    return sorted((CheckSet.from_dict(d) for d in data), key=lambda cs: cs.entry)


@dataclass(frozen=True)
class MiningConfig:
    security_exception_type: str = DEFAULT_SECURITY_EXCEPTION


@dataclass
class EntryAnalysis:
    """Everything computed for one entry point; the check set is the product."""

    entry: MethodRef
    graph: CallGraph
    candidates: dict[StmtRef, ConditionalCandidate]
    kept: frozenset[StmtRef]
    check_set: CheckSet
    marked_by: dict[StmtRef, tuple[str, ...]] = field(default_factory=dict)


def analyze_entry(program: Program, entry: MethodRef, cqs: Iterable[MethodRef],
                  spec: FilterSpec = FilterSpec(), exclude: ExcludeList = ExcludeList(),
                  all_eps: Iterable[MethodRef] = (), config: MiningConfig = MiningConfig(),
                  graph: Optional[CallGraph] = None) -> EntryAnalysis:
    cqs = frozenset(cqs)
    if graph is None:
        graph = build_cha_callgraph(program, entry, exclude, all_eps)
    throws = find_security_throws(graph, program, config.security_exception_type)
    sites = cq_call_sites(graph, cqs)
    passes = {
        "backward": mark_backward_cps(program, graph, throws | sites),
        "cq_internal": mark_cq_internal_cps(program, graph, cqs),
        "cq_return": forward_defuse_cq_returns(program, graph, cqs),
    }
    marked_by: dict[StmtRef, tuple[str, ...]] = {}
    for name, refs in passes.items():
        for r in refs:
            marked_by[r] = marked_by.get(r, ()) + (name,)

    loops: set[StmtRef] = set()
    for m in sorted({r.method for r in marked_by}):
        loops |= detect_loop_conditionals(build_cfg(program.method(m)))

    candidates = {r: collect_candidate(program, graph, r) for r in sorted(marked_by)}
    kept = frozenset(r for r, c in candidates.items() if evaluate_filter(spec, c, loops, cqs))

    resolver = ValueResolver(program, graph, entry)
    prov: dict[str, set[StmtRef]] = {}
    for r in sorted(kept):
        for check in conditional_checks(resolver, program.method(r.method), r.index):
            prov.setdefault(check, set()).add(r)

    for site in sorted(sites):
        decl = program.method(site.method)
        stmt = decl.body[site.index]
        if stmt.result:
            uses = forward_uses(program, graph, [(site.method, stmt.result)])
            if conditionals_using(program, graph, uses) & kept:
                continue
        for check in invocation_checks(resolver, decl, site.index, cqs):
            prov.setdefault(check, set()).add(site)

    check_set = CheckSet(entry, tuple(sorted(prov)), {c: tuple(sorted(s)) for c, s in prov.items()})
    return EntryAnalysis(entry, graph, candidates, kept, check_set, marked_by)


def mine_entrypoint_checks(program: Program, entry: MethodRef, cqs: Iterable[MethodRef],
                           spec: FilterSpec = FilterSpec(), exclude: ExcludeList = ExcludeList(),
                           all_eps: Iterable[MethodRef] = (),
                           config: MiningConfig = MiningConfig()) -> CheckSet:
    return analyze_entry(program, entry, cqs, spec, exclude, all_eps, config).check_set
