"""Per-method control-flow graphs over statement indices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .model import Goto, If, IRError, MethodDecl, Return, Switch, Throw


@dataclass(frozen=True)
class ControlFlowGraph:
    """One node per statement; node ``i`` is ``method.body[i]``.

    ``succs[i]`` keeps branch order: an ``if`` lists (fallthrough, target),
    a ``switch`` lists its cases in order followed by the default. Several
    cases may jump to the same label, so entries can repeat.
    """

    method: MethodDecl
    succs: tuple[tuple[int, ...], ...]
    reachable: frozenset[int]

    def __len__(self) -> int:
        return len(self.succs)

    @cached_property
    def preds(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.succs]
        for i, ss in enumerate(self.succs):
            for s in dict.fromkeys(ss):
                out[s].append(i)
        return tuple(tuple(p) for p in out)

    def unique_succs(self, i: int) -> tuple[int, ...]:
        return tuple(dict.fromkeys(self.succs[i]))

    def edges(self) -> list[tuple[int, int]]:
        return [(i, s) for i in range(len(self.succs)) for s in self.unique_succs(i)]


def build_cfg(method: MethodDecl) -> ControlFlowGraph:
    if method.body is None:
        raise IRError(f"{method.ref.signature} has no body", method.line)
    body = method.body
    labels = method.labels
    n = len(body)
    succs: list[tuple[int, ...]] = []
    for i, s in enumerate(body):
        nxt = (i + 1,) if i + 1 < n else ()
        if isinstance(s, If):
            succs.append(nxt + (labels[s.target],))
        elif isinstance(s, Switch):
            succs.append(tuple(labels[lbl] for _, lbl in s.cases) + (labels[s.default],))
        elif isinstance(s, Goto):
            succs.append((labels[s.target],))
        elif isinstance(s, (Return, Throw)):
            succs.append(())
        else:
            succs.append(nxt)
    reachable = set()
    if n:
        queue = deque([0])
        reachable.add(0)
        while queue:
            i = queue.popleft()
            for s in succs[i]:
                if s not in reachable:
                    reachable.add(s)
                    queue.append(s)
    return ControlFlowGraph(method, tuple(succs), frozenset(reachable))


def dominators(cfg: ControlFlowGraph, entry: int = 0) -> dict[int, frozenset[int]]:
    """Dominator sets of the reachable nodes (iterative data-flow)."""
    nodes = sorted(cfg.reachable)
    if not nodes:
        return {}
    universe = frozenset(nodes)
    dom = {v: universe for v in nodes}
    dom[entry] = frozenset({entry})
    changed = True
    while changed:
        changed = False
        for v in nodes:
            if v == entry:
                continue
            preds = [p for p in cfg.preds[v] if p in cfg.reachable]
            new = frozenset.intersection(*(dom[p] for p in preds)) if preds else frozenset()
            new = new | {v}
            if new != dom[v]:
                dom[v] = new
                changed = True
    return dom


def back_edges(cfg: ControlFlowGraph) -> list[tuple[int, int]]:
    """Edges ``t -> h`` where ``h`` dominates ``t``."""
    dom = dominators(cfg)
    return [(t, h) for t, h in cfg.edges() if t in dom and h in dom[t]]
