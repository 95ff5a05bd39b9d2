"""Control-predicate filter: keep/restriction rules over candidate conditionals.

A candidate conditional is described by the *elements* that flow into its
condition: fields read, method return values and string constants. Each
element carries its use chain, the sequence of steps the value takes on its
way to the condition (assignments, operators, array round trips, parameter
passing, and call arguments whose call result is used further on).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from xml.parsers import expat
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .callgraph import CallGraph, invoke_targets, unresolved_ref
from .errors import ConfigError
from .ir.cfg import ControlFlowGraph, back_edges
from .ir.model import (
    ArrayRead,
    ArrayWrite,
    Assign,
    BinOp,
    Cast,
    Compare,
    Const,
    FieldRead,
    FieldRef,
    Goto,
    If,
    Invoke,
    Label,
    Local,
    MethodDecl,
    MethodRef,
    Negate,
    StmtRef,
    Switch,
    UnOp,
)
from .ir.program import Program
from .matchlang import MatcherExpr, MatcherSyntaxError, matches, matches_string, parse_matcher

FIELD = "field"
METHOD_RETURN = "method_return"
STRING_CONST = "string_const"


# ---------------------------------------------------------------------------
# Candidates and their elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class ChainStep:
    kind: str  # assign | op | array | param | arg
    position: int = 0
    site: Optional[StmtRef] = None

    def __str__(self) -> str:
        return f"arg{self.position}@{self.site}" if self.kind == "arg" else self.kind


@dataclass(frozen=True, order=True)
class Element:
    kind: str
    key: str
    site: StmtRef
    chain: tuple[ChainStep, ...] = ()
    member: Union[MethodRef, FieldRef, None] = field(default=None, compare=False)

    @property
    def value(self) -> str:
        """Display text: member signature, or the string constant itself."""
        return self.key


@dataclass(frozen=True)
class ConditionalCandidate:
    stmt: StmtRef
    elements: tuple[Element, ...]

    @property
    def method(self) -> MethodRef:
        return self.stmt.method

    def of_kind(self, kind: str) -> list[Element]:
        return [e for e in self.elements if e.kind == kind]


def condition_operands(stmt) -> list:
    if isinstance(stmt, If):
        if isinstance(stmt.cond, Compare):
            return [stmt.cond.left, stmt.cond.right]
        return [stmt.cond.operand]
    if isinstance(stmt, Switch):
        return [Local(stmt.local)]
    raise TypeError("not a conditional")


def site_targets(program: Program, graph: CallGraph, site: StmtRef, stmt: Invoke) -> tuple[MethodRef, ...]:
    if site in graph.edges:
        return graph.edges[site]
    targets, ok = invoke_targets(program, stmt)
    return tuple(targets) if ok else (unresolved_ref(stmt),)


class _Tracer:
    """Backward walk from a conditional's operands to the elements feeding it."""

    def __init__(self, program: Program, graph: CallGraph):
        self.program = program
        self.graph = graph
        self.found: set[Element] = set()
        self.seen: set[tuple[MethodRef, str, bool]] = set()

    def value(self, decl: MethodDecl, v, site: StmtRef, path: tuple[ChainStep, ...]) -> None:
        if isinstance(v, Const):
            if v.kind == "string":
                self.found.add(Element(STRING_CONST, v.value, site, path[::-1]))
            return
        self.local(decl, v.name, path)

    def local(self, decl: MethodDecl, name: str, path: tuple[ChainStep, ...]) -> None:
        dirty = any(s.kind == "arg" for s in path)
        key = (decl.ref, name, dirty)
        if key in self.seen:
            return
        self.seen.add(key)
        body = decl.body
        for i in decl.defs.get(name, ()):
            self.definition(decl, i, body[i], path)
        k = decl.param_index(name)
        if k is not None:
            step = (ChainStep("param"),)
            for caller_site in self.graph.call_sites_of.get(decl.ref, ()):
                caller = self.program.method(caller_site.method)
                stmt = caller.body[caller_site.index]
                if k < len(stmt.args):
                    self.value(caller, stmt.args[k], caller_site, path + step)

    def definition(self, decl: MethodDecl, i: int, stmt, path) -> None:
        site = StmtRef(decl.ref, i)
        if isinstance(stmt, Invoke):
            for t in site_targets(self.program, self.graph, site, stmt):
                self.found.add(Element(METHOD_RETURN, t.signature, site, path[::-1], t))
            if stmt.receiver:
                self.local(decl, stmt.receiver, path + (ChainStep("arg", -1, site),))
            for p, a in enumerate(stmt.args):
                self.value(decl, a, site, path + (ChainStep("arg", p, site),))
            return
        expr = stmt.expr
        if isinstance(expr, Const):
            self.value(decl, expr, site, path)
        elif isinstance(expr, Local):
            self.local(decl, expr.name, path + (ChainStep("assign"),))
        elif isinstance(expr, Cast):
            self.value(decl, expr.operand, site, path + (ChainStep("assign"),))
        elif isinstance(expr, BinOp):
            for operand in (expr.left, expr.right):
                self.value(decl, operand, site, path + (ChainStep("op"),))
        elif isinstance(expr, UnOp):
            self.value(decl, expr.operand, site, path + (ChainStep("op"),))
        elif isinstance(expr, FieldRead):
            ref = self.program.resolve_field(expr.field)
            self.found.add(Element(FIELD, ref.signature, site, path[::-1], ref))
        elif isinstance(expr, ArrayRead):
            step = path + (ChainStep("array"),)
            self.local(decl, expr.array, step)
            for j, s in enumerate(decl.body):
                if isinstance(s, ArrayWrite) and s.array == expr.array:
                    self.value(decl, s.value, StmtRef(decl.ref, j), step)
        # new / lengthof / instanceof carry no element


def collect_candidate(program: Program, graph: CallGraph, stmt_ref: StmtRef) -> ConditionalCandidate:
    decl = program.method(stmt_ref.method)
    stmt = decl.body[stmt_ref.index]
    tracer = _Tracer(program, graph)
    for v in condition_operands(stmt):
        tracer.value(decl, v, stmt_ref, ())
    return ConditionalCandidate(stmt_ref, tuple(sorted(tracer.found)))


def is_in_arithmetic_chain(element: Element, handle_constants: bool = False) -> bool:
    """No call swallows the value on its way to the condition."""
    if element.kind == STRING_CONST and not handle_constants:
        return False
    return all(step.kind != "arg" for step in element.chain)


# ---------------------------------------------------------------------------
# Loop conditionals
# ---------------------------------------------------------------------------

def _skip_trivial(cfg: ControlFlowGraph, node: int) -> int:
    body = cfg.method.body
    seen = set()
    while isinstance(body[node], (Label, Goto)) and node not in seen and len(cfg.succs[node]) == 1:
        seen.add(node)
        node = cfg.succs[node][0]
    return node


def loop_conditionals_from_back_edges(cfg: ControlFlowGraph, edges: Iterable[tuple[int, int]]) -> set[int]:
    """Conditionals at the tail of a back edge, or first reached from its header."""
    body = cfg.method.body
    out = set()
    for tail, head in edges:
        for node in (tail, _skip_trivial(cfg, head)):
            if isinstance(body[node], (If, Switch)):
                out.add(node)
    return out


def detect_loop_conditionals(cfg: ControlFlowGraph) -> set[StmtRef]:
    ref = cfg.method.ref
    return {StmtRef(ref, i) for i in loop_conditionals_from_back_edges(cfg, back_edges(cfg))}


# ---------------------------------------------------------------------------
# Filter specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsInArithmeticChain:
    handle_constants: bool = False


@dataclass(frozen=True)
class IsValueUsedInMethodCall:
    position: int
    matcher_class: str  # MethodMatcher | StringMatcher
    matcher: MatcherExpr
    restrictions: Optional["Restrictions"] = None


@dataclass(frozen=True)
class Restrictions:
    items: tuple = ()
    use_union: bool = False


@dataclass(frozen=True)
class KeepRule:
    kind: str  # KeepFieldValueUse | KeepMethodReturnValueUse | KeepStringUse | KeepMethodContainerUse
    matcher: MatcherExpr
    restrictions: Optional[Restrictions] = None


@dataclass(frozen=True)
class AndRule:
    children: tuple


@dataclass(frozen=True)
class OrRule:
    children: tuple


@dataclass(frozen=True)
class NotRule:
    child: object


@dataclass(frozen=True)
class FilterSpec:
    """Top-level rules; a candidate is kept when any of them fires."""

    rules: tuple = ()


RULE_ELEMENT_KIND = {
    "KeepFieldValueUse": FIELD,
    "KeepMethodReturnValueUse": METHOD_RETURN,
    "KeepStringUse": STRING_CONST,
}
RULE_KINDS = tuple(RULE_ELEMENT_KIND) + ("KeepMethodContainerUse",)

_ATTR_NEWLINES = re.compile(r'="([^"]*)"', re.S)


def _parse_with_lines(text: str) -> tuple[ET.Element, dict[ET.Element, int]]:
    """ElementTree does not keep source positions, so build the tree from
    expat events and remember the line of every start tag."""
    parser = expat.ParserCreate()
    builder = ET.TreeBuilder()
    lines: dict[ET.Element, int] = {}

    def start(tag, attrs):
        lines[builder.start(tag, attrs)] = parser.CurrentLineNumber

    parser.StartElementHandler = start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.data
    parser.Parse(text, True)
    return builder.close(), lines


class _FilterReader:
    def __init__(self, path: str | None, lines: dict[ET.Element, int]):
        self.path = path
        self.lines = lines

    def error(self, msg: str, node: ET.Element) -> ConfigError:
        return ConfigError(msg, self.lines.get(node), self.path)

    def bool_attr(self, node: ET.Element, name: str, default: bool) -> bool:
        raw = node.get(name)
        if raw is None:
            return default
        if raw.strip().lower() not in ("true", "false"):
            raise self.error(f"{node.tag}: {name} must be true or false, got {raw!r}", node)
        return raw.strip().lower() == "true"

    def matcher(self, node: ET.Element, strings: bool) -> MatcherExpr:
        text = node.get("Value")
        if text is None:
            raise self.error(f"{node.tag}: missing Value attribute", node)
        try:
            return parse_matcher(text, strings=strings)
        except MatcherSyntaxError as exc:
            raise self.error(f"{node.tag}: bad matcher: {exc}", node) from None

    def rule(self, node: ET.Element):
        tag = node.tag
        if tag in ("And", "Or"):
            kids = tuple(self.rule(c) for c in node)
            if len(kids) < 2:
                raise self.error(f"{tag} needs at least 2 rules", node)
            return AndRule(kids) if tag == "And" else OrRule(kids)
        if tag == "Not":
            kids = list(node)
            if len(kids) != 1:
                raise self.error("Not needs exactly 1 rule", node)
            return NotRule(self.rule(kids[0]))
        if tag not in RULE_KINDS:
            raise self.error(f"unknown rule {tag!r}", node)
        matcher = self.matcher(node, strings=(tag == "KeepStringUse"))
        restrictions = None
        for child in node:
            if child.tag != "Restrictions":
                raise self.error(f"{tag}: unexpected element {child.tag!r}", child)
            if tag == "KeepMethodContainerUse":
                raise self.error("KeepMethodContainerUse takes no restrictions", node)
            if restrictions is not None:
                raise self.error(f"{tag}: more than one Restrictions element", node)
            restrictions = self.restrictions(child)
        return KeepRule(tag, matcher, restrictions)

    def restrictions(self, node: ET.Element) -> Restrictions:
        items = []
        for child in node:
            if child.tag == "Restrictions":
                items.append(self.restrictions(child))
            elif child.tag == "IsInArithmeticChain":
                items.append(IsInArithmeticChain(self.bool_attr(child, "HandleConstants", False)))
            elif child.tag == "IsValueUsedInMethodCall":
                items.append(self.used_in_call(child))
            else:
                raise self.error(f"unknown restriction {child.tag!r}", child)
        return Restrictions(tuple(items), self.bool_attr(node, "UseUnion", False))

    def used_in_call(self, node: ET.Element) -> IsValueUsedInMethodCall:
        raw = node.get("Position")
        try:
            position = int(raw)
        except (TypeError, ValueError):
            raise self.error(f"IsValueUsedInMethodCall: bad Position {raw!r}", node) from None
        if position < -1:
            raise self.error(f"IsValueUsedInMethodCall: Position must be >= -1, got {position}", node)
        matcher_node, nested = None, None
        for child in node:
            if child.tag == "Matcher":
                if matcher_node is not None:
                    raise self.error("IsValueUsedInMethodCall: more than one Matcher", node)
                matcher_node = child
            elif child.tag == "Restrictions":
                nested = self.restrictions(child)
            else:
                raise self.error(f"IsValueUsedInMethodCall: unexpected element {child.tag!r}", node)
        if matcher_node is None:
            raise self.error("IsValueUsedInMethodCall: missing Matcher", node)
        cls = matcher_node.get("class")
        if cls not in ("MethodMatcher", "StringMatcher"):
            raise self.error(f"Matcher: class must be MethodMatcher or StringMatcher, got {cls!r}", matcher_node)
        matcher = self.matcher(matcher_node, strings=(cls == "StringMatcher"))
        return IsValueUsedInMethodCall(position, cls, matcher, nested)


def parse_filter(document: str, path: str | None = None) -> FilterSpec:
    """Parse the XML filter document.

    Line breaks inside attribute values are preserved (XML would otherwise
    fold them into spaces) so that multi-line regex literals keep working.
    """
    if not document.strip():
        return FilterSpec()
    escaped = _ATTR_NEWLINES.sub(lambda m: '="' + m.group(1).replace("\n", "&#10;") + '"', document)
    try:
        root, lines = _parse_with_lines(escaped)
    except expat.ExpatError as exc:
        raise ConfigError(f"malformed filter document: {expat.ErrorString(exc.code)}", exc.lineno, path) from None
    reader = _FilterReader(path, lines)
    if root.tag in RULE_KINDS or root.tag in ("And", "Or", "Not"):
        return FilterSpec((reader.rule(root),))
    return FilterSpec(tuple(reader.rule(child) for child in root))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _matcher_accepts(cls: str, matcher: MatcherExpr, element: Element) -> bool:
    if cls == "StringMatcher":
        return element.kind == STRING_CONST and matches_string(matcher, element.key)
    return element.kind == METHOD_RETURN and matches(matcher, element.member)


def _producers(candidate: ConditionalCandidate, site: StmtRef, position: int) -> list[Element]:
    """Elements whose value reaches operand ``position`` of the call at ``site``
    through assignments and operators only."""
    out = []
    for e in candidate.elements:
        for step in e.chain:
            if step.kind == "arg":
                if step.site == site and step.position == position:
                    out.append(e)
                break
    return out


def restriction_holds(r, element: Element, candidate: ConditionalCandidate) -> bool:
    if isinstance(r, Restrictions):
        results = (restriction_holds(i, element, candidate) for i in r.items)
        return any(results) if r.use_union else all(results)
    if isinstance(r, IsInArithmeticChain):
        return is_in_arithmetic_chain(element, r.handle_constants)
    if isinstance(r, IsValueUsedInMethodCall):
        if element.kind == METHOD_RETURN:
            related = _producers(candidate, element.site, r.position)
        else:
            first = next((s for s in element.chain if s.kind == "arg"), None)
            if first is None or first.position != r.position:
                return False
            related = [e for e in candidate.elements
                       if e.kind == METHOD_RETURN and e.site == first.site]
        return any(
            _matcher_accepts(r.matcher_class, r.matcher, other)
            and (r.restrictions is None or restriction_holds(r.restrictions, other, candidate))
            for other in related
        )
    raise TypeError(f"unknown restriction {r!r}")


def rule_fires(rule, candidate: ConditionalCandidate) -> bool:
    if isinstance(rule, AndRule):
        return all(rule_fires(c, candidate) for c in rule.children)
    if isinstance(rule, OrRule):
        return any(rule_fires(c, candidate) for c in rule.children)
    if isinstance(rule, NotRule):
        return not rule_fires(rule.child, candidate)
    if rule.kind == "KeepMethodContainerUse":
        return matches(rule.matcher, candidate.method)
    for e in candidate.of_kind(RULE_ELEMENT_KIND[rule.kind]):
        if e.kind == STRING_CONST:
            hit = matches_string(rule.matcher, e.key)
        else:
            hit = matches(rule.matcher, e.member)
        if hit and (rule.restrictions is None or restriction_holds(rule.restrictions, e, candidate)):
            return True
    return False


def evaluate_filter(spec: FilterSpec, candidate: ConditionalCandidate, loop_set=frozenset(),
                    cqs=frozenset()) -> bool:
    if candidate.stmt in loop_set:
        return False
    if candidate.method in cqs:
        return True
    for e in candidate.of_kind(METHOD_RETURN):
        if e.member in cqs and is_in_arithmetic_chain(e):
            return True
    return any(rule_fires(r, candidate) for r in spec.rules)
