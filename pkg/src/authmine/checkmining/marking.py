"""Finding candidate control predicates inside one entry point's call graph."""

from __future__ import annotations

from collections import deque
from typing import Iterable

from ..callgraph import CallGraph
from ..ir.cfg import ControlFlowGraph, build_cfg
from ..ir.model import (
    ArrayRead,
    ArrayWrite,
    Assign,
    BinOp,
    Cast,
    Invoke,
    Local,
    MethodRef,
    Return,
    StmtRef,
    Switch,
    Throw,
    UnOp,
    If,
)
from ..ir.program import Program
from ..cpfilter import condition_operands

DEFAULT_SECURITY_EXCEPTION = "java.lang.SecurityException"


def _graph_bodies(program: Program, graph: CallGraph):
    for ref in graph.nodes:
        decl = program.method(ref)
        if decl is not None and decl.body is not None:
            yield decl


def find_security_throws(graph: CallGraph, program: Program,
                         exception_type: str = DEFAULT_SECURITY_EXCEPTION) -> set[StmtRef]:
    out = set()
    for decl in _graph_bodies(program, graph):
        for i, s in enumerate(decl.body):
            if isinstance(s, Throw) and program.is_subtype(s.exc_type, exception_type):
                out.add(StmtRef(decl.ref, i))
    return out


def cq_call_sites(graph: CallGraph, cqs: Iterable[MethodRef]) -> set[StmtRef]:
    cqs = set(cqs)
    return {site for site, targets in graph.edges.items() if cqs.intersection(targets)}


def conditionals_in(decl) -> list[int]:
    return [i for i, s in enumerate(decl.body or ()) if isinstance(s, (If, Switch))]


# ---------------------------------------------------------------------------
# Backward marking
# ---------------------------------------------------------------------------

class _Summaries:
    """Interprocedural reachability facts over valid call/return paths."""

    def __init__(self, program: Program, graph: CallGraph, targets: set[StmtRef]):
        self.graph = graph
        self.targets = targets
        self.cfgs: dict[MethodRef, ControlFlowGraph] = {
            d.ref: build_cfg(d) for d in _graph_bodies(program, graph)
        }
        self.callees: dict[StmtRef, tuple[MethodRef, ...]] = {}
        self.skippable: dict[StmtRef, bool] = {}
        for site in graph.edges:
            if site.method in self.cfgs:
                self.callees[site] = tuple(t for t in graph.expanded_targets(site) if t in self.cfgs)
                self.skippable[site] = bool(graph.cut_targets(site)) or \
                    len(self.callees[site]) < len(graph.edges[site])
        self.can_return = self._fix_can_return()
        self.contains_target = self._fix_contains_target()

    def _body(self, m: MethodRef):
        return self.cfgs[m].method.body

    def local_succs(self, m: MethodRef, i: int, can_return=None) -> tuple[int, ...]:
        """Successors within ``m``; a call continues only if it can come back."""
        can_return = self.can_return if can_return is None else can_return
        cfg = self.cfgs[m]
        site = StmtRef(m, i)
        if site in self.callees:
            if not (self.skippable[site] or any(can_return[g] for g in self.callees[site])):
                return ()
        return cfg.unique_succs(i)

    def local_closure(self, m: MethodRef, starts: Iterable[int], can_return=None) -> set[int]:
        seen = set(starts)
        queue = deque(seen)
        while queue:
            i = queue.popleft()
            for s in self.local_succs(m, i, can_return):
                if s not in seen:
                    seen.add(s)
                    queue.append(s)
        return seen

    def _fix_can_return(self) -> dict[MethodRef, bool]:
        can = {m: False for m in self.cfgs}
        changed = True
        while changed:
            changed = False
            for m, cfg in self.cfgs.items():
                if can[m] or not len(cfg):
                    continue
                body = cfg.method.body
                if any(isinstance(body[i], Return) for i in self.local_closure(m, [0], can)):
                    can[m] = True
                    changed = True
        return can

    def _hits_target(self, m: MethodRef, nodes: Iterable[int], contains) -> bool:
        for i in nodes:
            site = StmtRef(m, i)
            if site in self.targets:
                return True
            if any(contains[g] for g in self.callees.get(site, ())):
                return True
        return False

    def _fix_contains_target(self) -> dict[MethodRef, bool]:
        contains = {m: False for m in self.cfgs}
        changed = True
        while changed:
            changed = False
            for m, cfg in self.cfgs.items():
                if contains[m] or not len(cfg):
                    continue
                if self._hits_target(m, self.local_closure(m, [0]), contains):
                    contains[m] = True
                    changed = True
        return contains

    def reaches_target(self, m: MethodRef, starts: Iterable[int]) -> bool:
        return self._hits_target(m, self.local_closure(m, starts), self.contains_target)

    def reaches_return(self, m: MethodRef, starts: Iterable[int]) -> bool:
        body = self._body(m)
        return any(isinstance(body[i], Return) for i in self.local_closure(m, starts))


def mark_backward_cps(program: Program, graph: CallGraph, targets: Iterable[StmtRef]) -> set[StmtRef]:
    """Conditionals reachable from the entry from which a target is reachable.

    Paths respect call/return matching: a callee returns only to the call
    site that entered it, and a call whose callees never return blocks the
    path (unless some target of the call is a cut, which is skipped over).
    """
    targets = set(targets)
    if not targets:
        return set()
    sm = _Summaries(program, graph, targets)
    if graph.root not in sm.cfgs:
        return set()

    # methods entered on valid paths and the call sites reached inside them
    entered = {graph.root}
    local_reach: dict[MethodRef, set[int]] = {}
    reached_sites: set[StmtRef] = set()
    work = deque([graph.root])
    while work:
        m = work.popleft()
        local_reach[m] = sm.local_closure(m, [0]) if len(sm.cfgs[m]) else set()
        for i in local_reach[m]:
            site = StmtRef(m, i)
            if site in sm.callees:
                reached_sites.add(site)
                for g in sm.callees[site]:
                    if g not in entered:
                        entered.add(g)
                        work.append(g)

    # ret_reaches[m]: after returning from m, some target is still reachable
    after_site = {
        site: (sm.reaches_target(site.method, sm.cfgs[site.method].unique_succs(site.index)),
               sm.reaches_return(site.method, sm.cfgs[site.method].unique_succs(site.index)))
        for site in reached_sites
    }
    ret_reaches = {m: False for m in entered}
    changed = True
    while changed:
        changed = False
        for site in sorted(reached_sites):
            direct, returns = after_site[site]
            ok = direct or (returns and ret_reaches[site.method])
            if not ok:
                continue
            for g in sm.callees[site]:
                if not ret_reaches[g]:
                    ret_reaches[g] = True
                    changed = True

    marked = set()
    for m in sorted(entered):
        body = sm.cfgs[m].method.body
        for i in sorted(local_reach[m]):
            if not isinstance(body[i], (If, Switch)):
                continue
            for s in sm.cfgs[m].unique_succs(i):
                if sm.reaches_target(m, [s]) or (ret_reaches[m] and sm.reaches_return(m, [s])):
                    marked.add(StmtRef(m, i))
                    break
    return marked


# ---------------------------------------------------------------------------
# Context-query internals
# ---------------------------------------------------------------------------

def mark_cq_internal_cps(program: Program, graph: CallGraph, cqs: Iterable[MethodRef]) -> set[StmtRef]:
    cqs = set(cqs)
    start = [m for m in graph.nodes if m in cqs]
    seen = set(start)
    queue = deque(start)
    while queue:
        m = queue.popleft()
        for site, _ in graph.edges.items():
            if site.method != m:
                continue
            for t in graph.expanded_targets(site):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
    out = set()
    for m in seen:
        decl = program.method(m)
        if decl is not None:
            out.update(StmtRef(m, i) for i in conditionals_in(decl))
    return out


# ---------------------------------------------------------------------------
# Forward def-use from context-query returns
# ---------------------------------------------------------------------------

def forward_uses(program: Program, graph: CallGraph,
                 sources: Iterable[tuple[MethodRef, str]]) -> set[tuple[MethodRef, str]]:
    """Locals that may hold a value derived from ``sources``.

    Values move through copies, operators, casts, array stores and loads,
    and from call arguments into callee parameters. Fields and return
    values are not followed.
    """
    tainted = set(sources)
    queue = deque(tainted)

    def add(item):
        if item not in tainted:
            tainted.add(item)
            queue.append(item)

    while queue:
        m, name = queue.popleft()
        decl = program.method(m)
        if decl is None or decl.body is None:
            continue
        for i, s in enumerate(decl.body):
            if isinstance(s, Assign):
                e = s.expr
                if isinstance(e, Local) and e.name == name:
                    add((m, s.local))
                elif isinstance(e, BinOp) and Local(name) in (e.left, e.right):
                    add((m, s.local))
                elif isinstance(e, (UnOp, Cast)) and e.operand == Local(name):
                    add((m, s.local))
                elif isinstance(e, ArrayRead) and e.array == name:
                    add((m, s.local))
            elif isinstance(s, ArrayWrite) and s.value == Local(name):
                add((m, s.array))
            elif isinstance(s, Invoke):
                site = StmtRef(m, i)
                for k, a in enumerate(s.args):
                    if a != Local(name):
                        continue
                    for t in graph.expanded_targets(site):
                        callee = program.method(t)
                        if callee is not None and callee.body is not None:
                            add((t, callee.params[k][0]))
    return tainted


def conditionals_using(program: Program, graph: CallGraph,
                       tainted: set[tuple[MethodRef, str]]) -> set[StmtRef]:
    out = set()
    for decl in _graph_bodies(program, graph):
        for i in conditionals_in(decl):
            ops = condition_operands(decl.body[i])
            if any(isinstance(v, Local) and (decl.ref, v.name) in tainted for v in ops):
                out.add(StmtRef(decl.ref, i))
    return out


def cq_return_sources(program: Program, graph: CallGraph, cqs: Iterable[MethodRef]
                      ) -> dict[StmtRef, tuple[MethodRef, str]]:
    """Call sites of context queries that keep the returned value."""
    out = {}
    for site in sorted(cq_call_sites(graph, cqs)):
        stmt = program.method(site.method).body[site.index]
        if stmt.result:
            out[site] = (site.method, stmt.result)
    return out


def forward_defuse_cq_returns(program: Program, graph: CallGraph, cqs: Iterable[MethodRef]) -> set[StmtRef]:
    sources = cq_return_sources(program, graph, cqs).values()
    return conditionals_using(program, graph, forward_uses(program, graph, sources))
