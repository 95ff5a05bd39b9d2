"""S-expression matchers over method and field names.

A matcher is a boolean tree of ``and``/``or``/``not`` over leaves such as
``(starts-with-package android.)`` or ``(regex-name-words `^check\\s`)``.
Regex literals are delimited by backquotes; a line break inside one is a
continuation, so it is dropped together with the indentation around it.
The same leaves without a ``-package``/``-class``/``-name`` suffix match
plain strings (used by the control-predicate filter).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .ir.model import FieldRef, MethodRef, parse_method_signature
from .ir.program import Program

STRING_OPS = ("starts-with", "ends-with", "contains", "equals", "regex")
TARGETS = ("package", "class", "name")
OP_ALIASES = {"equal": "equals"}


class MatcherSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"{self.line}:{self.col}: {self.message}"


_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_SEPARATORS = re.compile(r"[_\s]+")


def split_words(identifier: str) -> str:
    """``canClearIdentity`` -> ``can clear identity``.

    Splits at lower-to-upper transitions and underscores only, so acronym
    runs such as ``VPN`` stay one word and digits stick to the word before.
    """
    spaced = _CAMEL.sub(" ", identifier)
    return " ".join(w.lower() for w in _SEPARATORS.split(spaced) if w)


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    """``op`` applied to ``target`` (``None`` for plain-string matchers)."""

    op: str
    target: Optional[str]
    arg: str

    def __post_init__(self):
        if self.op == "regex":
            object.__setattr__(self, "_rx", re.compile(self.arg))

    def test(self, text: str) -> bool:
        if self.op == "starts-with":
            return text.startswith(self.arg)
        if self.op == "ends-with":
            return text.endswith(self.arg)
        if self.op == "contains":
            return self.arg in text
        if self.op == "equals":
            return text == self.arg
        return self._rx.search(text) is not None

    def __str__(self) -> str:
        name = self.op if self.target is None else f"{self.op}-{self.target}"
        return f"({name} {_render_arg(self.arg, self.op == 'regex')})"


@dataclass(frozen=True)
class RegexNameWords:
    pattern: str

    def __post_init__(self):
        object.__setattr__(self, "_rx", re.compile(self.pattern))

    def __str__(self) -> str:
        return f"(regex-name-words {_render_arg(self.pattern, True)})"


@dataclass(frozen=True)
class RegexClassWords:
    pattern: str
    index: int

    def __post_init__(self):
        object.__setattr__(self, "_rx", re.compile(self.pattern))

    def __str__(self) -> str:
        return f"(regex-class-words {_render_arg(self.pattern, True)} {self.index})"


@dataclass(frozen=True)
class And:
    children: tuple

    def __str__(self) -> str:
        return "(and " + " ".join(map(str, self.children)) + ")"


@dataclass(frozen=True)
class Or:
    children: tuple

    def __str__(self) -> str:
        return "(or " + " ".join(map(str, self.children)) + ")"


@dataclass(frozen=True)
class Not:
    child: object

    def __str__(self) -> str:
        return f"(not {self.child})"


MatcherExpr = Union[Leaf, RegexNameWords, RegexClassWords, And, Or, Not]


def _render_arg(arg: str, regex: bool) -> str:
    if regex or re.search(r"[\s()`;]", arg) or not arg:
        return f"`{arg}`"
    return arg


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>;[^\n]*)|(?P<lp>\()|(?P<rp>\))"
    r"|(?P<regex>`[^`]*`)|(?P<atom>[^\s()`;]+)"
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise MatcherSyntaxError("unterminated regex literal", line, pos - line_start + 1)
        kind, value = m.lastgroup, m.group()
        col = pos - line_start + 1
        if kind == "regex":
            value = re.sub(r"[ \t]*\r?\n\s*", "", value[1:-1])
        if kind not in ("ws", "comment"):
            out.append((kind, value, line, col))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = pos + m.group().rfind("\n") + 1
        pos = m.end()
    return out


class _Reader:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def error(self, msg: str) -> MatcherSyntaxError:
        if self.i < len(self.toks):
            _, _, line, col = self.toks[self.i]
            return MatcherSyntaxError(msg, line, col)
        return MatcherSyntaxError(msg + " (end of input)")

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def sexp(self):
        """Read one form as nested lists of (kind, value) atoms."""
        if self.done():
            raise self.error("expected '('")
        kind, value, line, col = self.toks[self.i]
        if kind == "rp":
            raise self.error("unbalanced ')'")
        self.i += 1
        if kind != "lp":
            return (kind, value, line, col)
        items = []
        while True:
            if self.done():
                raise MatcherSyntaxError(f"unbalanced '(' opened at {line}:{col}")
            if self.toks[self.i][0] == "rp":
                self.i += 1
                return (items, line, col)
            items.append(self.sexp())


def _build(form, *, strings: bool = False):
    if not isinstance(form[0], list):
        _, value, line, col = form
        raise MatcherSyntaxError(f"expected '(' before {value!r}", line, col)
    items, line, col = form
    if not items or isinstance(items[0][0], list):
        raise MatcherSyntaxError("expected an operation name", line, col)
    head = items[0][1]
    args = items[1:]

    def atom(i: int) -> str:
        if isinstance(args[i][0], list):
            raise MatcherSyntaxError(f"{head}: argument {i + 1} must be an atom", line, col)
        return args[i][1]

    def arity(n: int) -> None:
        if len(args) != n:
            raise MatcherSyntaxError(f"{head} takes {n} argument(s), got {len(args)}", line, col)

    def compiled(pattern: str) -> str:
        try:
            re.compile(pattern)
        except re.error as exc:
            raise MatcherSyntaxError(f"bad regex {pattern!r}: {exc}", line, col) from None
        return pattern

    if head in ("and", "or"):
        if len(args) < 2:
            raise MatcherSyntaxError(f"{head} needs at least 2 operands", line, col)
        children = tuple(_build(a, strings=strings) for a in args)
        return And(children) if head == "and" else Or(children)
    if head == "not":
        arity(1)
        return Not(_build(args[0], strings=strings))
    if head == "regex-name-words" and not strings:
        arity(1)
        return RegexNameWords(compiled(atom(0)))
    if head == "regex-class-words" and not strings:
        arity(2)
        try:
            index = int(atom(1))
        except ValueError:
            raise MatcherSyntaxError(f"regex-class-words index must be an integer", line, col) from None
        if index < -1:
            raise MatcherSyntaxError("regex-class-words index must be >= -1", line, col)
        return RegexClassWords(compiled(atom(0)), index)
    op, target = head, None
    if not strings:
        op, _, target = head.rpartition("-")
        if target not in TARGETS:
            raise MatcherSyntaxError(f"unknown operation {head!r}", line, col)
    op = OP_ALIASES.get(op, op)
    if op not in STRING_OPS:
        raise MatcherSyntaxError(f"unknown operation {head!r}", line, col)
    arity(1)
    arg = atom(0)
    if op == "regex":
        compiled(arg)
    return Leaf(op, target, arg)


def parse_matchers(text: str, *, strings: bool = False) -> list[MatcherExpr]:
    """Every top-level form in ``text``."""
    reader = _Reader(text)
    out = []
    while not reader.done():
        out.append(_build(reader.sexp(), strings=strings))
    return out


def parse_matcher(text: str, *, strings: bool = False) -> MatcherExpr:
    exprs = parse_matchers(text, strings=strings)
    if len(exprs) != 1:
        raise MatcherSyntaxError(f"expected exactly one expression, found {len(exprs)}")
    return exprs[0]


def parse_string_matcher(text: str) -> MatcherExpr:
    """A matcher over plain strings, e.g. ``(regex `^ro\\.debuggable$`)``."""
    return parse_matcher(text, strings=True)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Member = Union[MethodRef, FieldRef]


def _part(member: Member, target: str) -> str:
    if target == "package":
        return member.package
    if target == "class":
        return member.simple_class
    return member.name


def matches(expr: MatcherExpr, member: Member) -> bool:
    if isinstance(expr, And):
        return all(matches(c, member) for c in expr.children)
    if isinstance(expr, Or):
        return any(matches(c, member) for c in expr.children)
    if isinstance(expr, Not):
        return not matches(expr.child, member)
    if isinstance(expr, RegexNameWords):
        return expr._rx.search(split_words(member.name)) is not None
    if isinstance(expr, RegexClassWords):
        parts = member.simple_class.split("$")[::-1]  # innermost first
        if expr.index == -1:
            return any(expr._rx.search(split_words(p)) for p in parts)
        if expr.index >= len(parts):
            return False
        return expr._rx.search(split_words(parts[expr.index])) is not None
    if expr.target is None:
        raise TypeError("string matcher applied to a member")
    return expr.test(_part(member, expr.target))


def matches_string(expr: MatcherExpr, text: str) -> bool:
    if isinstance(expr, And):
        return all(matches_string(c, text) for c in expr.children)
    if isinstance(expr, Or):
        return any(matches_string(c, text) for c in expr.children)
    if isinstance(expr, Not):
        return not matches_string(expr.child, text)
    if not isinstance(expr, Leaf) or expr.target is not None:
        raise TypeError("member matcher applied to a string")
    return expr.test(text)


def parse_seeds(text: str) -> list[MethodRef]:
    """One method signature per line; ``#`` comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_method_signature(line))
        except ValueError as exc:
            raise MatcherSyntaxError(str(exc), lineno, 1) from None
    return out


def identify_context_queries(program: Program, exprs: Iterable[MatcherExpr],
                             seeds: Iterable[MethodRef] = ()) -> list[MethodRef]:
    exprs = list(exprs)
    found = set(seeds)
    if exprs:
        for m in program.methods():
            if m.body is not None and any(matches(e, m.ref) for e in exprs):
                found.add(m.ref)
    return sorted(found)
