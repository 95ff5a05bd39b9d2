"""Inter-procedural value expansion and the check simplification rules.

Values are rendered as canonical strings. ``ALL`` stands for "any value"
and ``NULL`` for the null constant. Composite values embed the signatures
of the fields and methods they come from, e.g.
``<android.os.Binder: int getCallingUid()>()``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional

from ..callgraph import CallGraph
from ..cpfilter import site_targets
from ..ir.model import (
    ArrayRead,
    Assign,
    BinOp,
    Cast,
    Compare,
    Const,
    FieldRead,
    If,
    InstanceOf,
    Invoke,
    LengthOf,
    Local,
    MethodDecl,
    MethodRef,
    New,
    StmtRef,
    Switch,
    UnOp,
)
from ..ir.program import Program

BUNDLE_CLASS = "android.os.Bundle"


@dataclass(frozen=True, order=True)
class Val:
    kind: str  # all | null | const | field | method | array | binop | unop
    text: str
    const: object = field(default=None, compare=False)

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    def __str__(self) -> str:
        return self.text


ALL = Val("all", "ALL")
NULL = Val("null", "NULL")


def const_val(c: Const) -> Val:
    if c.kind == "null":
        return NULL
    if c.kind == "bool":
        return Val("const", "true" if c.value else "false", c.value)
    if c.kind == "string":
        return Val("const", json.dumps(c.value, ensure_ascii=False), c.value)
    return Val("const", str(c.value), c.value)


def _py_const(value) -> Val:
    return const_val(Const.of(value))


def normalize(values: Iterable[Val]) -> frozenset[Val]:
    """Rule 7 (ALL absorbs the set) and rule 8 (NULL dropped beside others)."""
    s = frozenset(values)
    if not s or ALL in s:
        return frozenset({ALL})
    if NULL in s and len(s) > 1:
        s = s - {NULL}
    return s


def render_set(values: frozenset[Val]) -> str:
    texts = sorted(v.text for v in values)
    return texts[0] if len(texts) == 1 else "{" + " | ".join(texts) + "}"


def render_call(ref: MethodRef, arg_sets: list[frozenset[Val]]) -> str:
    return f"{ref.signature}(" + ", ".join(render_set(s) for s in arg_sets) + ")"


_INT_FOLD = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "&": lambda a, b: a & b, "|": lambda a, b: a | b, "^": lambda a, b: a ^ b,
    "<<": lambda a, b: a << b if 0 <= b < 64 else None,
    ">>": lambda a, b: a >> b if 0 <= b < 64 else None,
}
_CMP_FOLD = {
    "==": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
}


def fold_binop(op: str, a: Val, b: Val) -> Val:
    if a.is_const and b.is_const:
        x, y = a.const, b.const
        numeric = all(isinstance(v, (int, bool)) for v in (x, y))
        if numeric and op in _CMP_FOLD:
            return _py_const(bool(_CMP_FOLD[op](int(x), int(y))))
        if numeric and op in _INT_FOLD and not (isinstance(x, bool) and isinstance(y, bool)
                                                and op not in "&|^"):
            r = _INT_FOLD[op](int(x), int(y))
            if r is not None:
                if isinstance(x, bool) and isinstance(y, bool):
                    return _py_const(bool(r))
                return _py_const(r)
        if op == "+" and isinstance(x, str) and isinstance(y, str):
            return _py_const(x + y)
    return Val("binop", f"({a.text} {op} {b.text})")


def fold_unop(op: str, a: Val) -> Val:
    if a.is_const:
        if op == "!" and isinstance(a.const, (bool, int)):
            return _py_const(not a.const)
        if op == "-" and isinstance(a.const, int) and not isinstance(a.const, bool):
            return _py_const(-a.const)
    return Val("unop", f"({op}{a.text})")


class ValueResolver:
    """Computes the value sets of locals for one entry point's call graph."""

    def __init__(self, program: Program, graph: CallGraph, entry: Optional[MethodRef] = None):
        self.program = program
        self.graph = graph
        self.entry = entry or graph.root
        self._memo: dict[tuple[MethodRef, str], frozenset[Val]] = {}
        self._active: set[tuple[MethodRef, str]] = set()

    # -- public --------------------------------------------------------------

    def values(self, decl: MethodDecl, v) -> frozenset[Val]:
        """Normalized value set of an operand at a use site."""
        if isinstance(v, Const):
            return frozenset({const_val(v)})
        if not self.program.is_tracked_local(decl, v.name):  # rule 1
            return frozenset({ALL})
        return normalize(self.raw_local(decl, v.name))

    def raw_local(self, decl: MethodDecl, name: str) -> frozenset[Val]:
        key = (decl.ref, name)
        if key in self._memo:
            return self._memo[key]
        if key in self._active:  # rule 2
            return frozenset({ALL})
        self._active.add(key)
        try:
            result = self._compute(decl, name)
        finally:
            self._active.discard(key)
        self._memo[key] = result
        return result

    # -- internals -----------------------------------------------------------

    def _compute(self, decl: MethodDecl, name: str) -> frozenset[Val]:
        if name == "this":
            return frozenset({ALL})
        out: set[Val] = set()
        for i in decl.defs.get(name, ()):
            out |= self._definition(decl, i, decl.body[i])
        k = decl.param_index(name)
        if k is not None:
            if decl.ref == self.entry:  # rule 3
                return frozenset({ALL})
            sites = self.graph.call_sites_of.get(decl.ref, ())
            if not sites:
                return frozenset({ALL})
            for site in sites:
                caller = self.program.method(site.method)
                stmt = caller.body[site.index]
                if k < len(stmt.args):
                    out |= self.values(caller, stmt.args[k])
                else:
                    out.add(ALL)
        return frozenset(out) if out else frozenset({ALL})

    def _definition(self, decl: MethodDecl, i: int, stmt) -> frozenset[Val]:
        if isinstance(stmt, Invoke):
            return self.call_values(decl, StmtRef(decl.ref, i), stmt)
        e = stmt.expr
        if isinstance(e, Const):
            return frozenset({const_val(e)})
        if isinstance(e, Local):
            return self.values(decl, e)
        if isinstance(e, FieldRead):
            return frozenset({Val("field", self.program.resolve_field(e.field).signature)})
        if isinstance(e, (Cast, New, LengthOf, InstanceOf)):  # rule 4
            return frozenset({ALL})
        if isinstance(e, ArrayRead):
            base = normalize(self.raw_local(decl, e.array))  # no rule 1 for array bases
            index = self.values(decl, e.index)
            if ALL in base or ALL in index:  # rule 5
                return frozenset({ALL})
            return frozenset(Val("array", f"{b.text}[{x.text}]") for b in base for x in index)
        if isinstance(e, BinOp):
            left, right = self.values(decl, e.left), self.values(decl, e.right)
            if ALL in left or ALL in right:
                return frozenset({ALL})
            return frozenset(fold_binop(e.op, a, b) for a, b in product(sorted(left), sorted(right)))
        if isinstance(e, UnOp):
            operand = self.values(decl, e.operand)
            if ALL in operand:
                return frozenset({ALL})
            return frozenset(fold_unop(e.op, a) for a in operand)
        return frozenset({ALL})

    def arg_sets(self, decl: MethodDecl, stmt: Invoke) -> list[frozenset[Val]]:
        return [self.values(decl, a) for a in stmt.args]

    def call_values(self, decl: MethodDecl, site: StmtRef, stmt: Invoke) -> frozenset[Val]:
        """One value per possible target, arguments expanded, receiver omitted."""
        targets = site_targets(self.program, self.graph, site, stmt)
        if any(t.class_name == BUNDLE_CLASS for t in targets):  # rule 6
            return frozenset({ALL})
        args = self.arg_sets(decl, stmt)
        return frozenset(Val("method", render_call(t, args)) for t in targets)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def encode_pair(a: Val, b: Val) -> str:
    x, y = sorted((a.text, b.text))
    return f"CP[{x} ; {y}]"


def encode_invocation(ref: MethodRef, arg_sets: list[frozenset[Val]]) -> str:
    return f"CQ[{render_call(ref, arg_sets)}]"


def keep_pair(a: Val, b: Val) -> bool:
    """Rule 9."""
    if a.kind in ("all", "null") or b.kind in ("all", "null"):
        return False
    if a.is_const and b.is_const:
        return False
    return a != b


def _equals_rebuild(resolver: ValueResolver, decl: MethodDecl, operand, other: frozenset[Val]):
    """Rule 10: ``x.equals(y) == const`` becomes pairs of receiver and argument values."""
    if not isinstance(operand, Local) or not other or not all(v.is_const for v in other):
        return None
    defs = decl.defs.get(operand.name, ())
    if not defs or decl.param_index(operand.name) is not None:
        return None
    stmts = [decl.body[i] for i in defs]
    if not all(isinstance(s, Invoke) and s.name == "equals" and s.arity == 1 and s.receiver
               for s in stmts):
        return None
    pairs = set()
    for s in stmts:
        recv = resolver.values(decl, Local(s.receiver))
        arg = resolver.values(decl, s.args[0])
        pairs |= {(a, b) for a in recv for b in arg}
    return pairs


def conditional_pairs(resolver: ValueResolver, decl: MethodDecl, stmt) -> set[tuple[Val, Val]]:
    """All surviving value pairs of a conditional (before encoding)."""
    if isinstance(stmt, Switch):
        scrutinee = resolver.values(decl, Local(stmt.local))
        raw = {(a, const_val(c)) for c, _ in stmt.cases for a in scrutinee}
    else:
        cond = stmt.cond
        if isinstance(cond, Compare):
            left_op, right_op = cond.left, cond.right
        else:
            left_op, right_op = cond.operand, Const("int", 0)
        left = resolver.values(decl, left_op)
        right = resolver.values(decl, right_op)
        raw = _equals_rebuild(resolver, decl, left_op, right)
        if raw is None:
            raw = _equals_rebuild(resolver, decl, right_op, left)
        if raw is None:
            raw = {(a, b) for a in left for b in right}
    return {(a, b) for a, b in raw if keep_pair(a, b)}


def conditional_checks(resolver: ValueResolver, decl: MethodDecl, index: int) -> set[str]:
    stmt = decl.body[index]
    if not isinstance(stmt, (If, Switch)):
        raise TypeError("not a conditional")
    return {encode_pair(a, b) for a, b in conditional_pairs(resolver, decl, stmt)}


def invocation_checks(resolver: ValueResolver, decl: MethodDecl, index: int,
                      cqs: Iterable[MethodRef]) -> set[str]:
    stmt = decl.body[index]
    site = StmtRef(decl.ref, index)
    cqs = set(cqs)
    targets = [t for t in site_targets(resolver.program, resolver.graph, site, stmt) if t in cqs]
    args = resolver.arg_sets(decl, stmt)
    return {encode_invocation(t, args) for t in targets}
