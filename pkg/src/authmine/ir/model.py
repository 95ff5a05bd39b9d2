"""Data model for the textual three-address IR.

Everything here is immutable once a :class:`Program` has been built. Member
references (:class:`MethodRef`, :class:`FieldRef`) use Soot-style signatures
(``<pkg.Cls: int name(int,java.lang.String)>``) as their canonical text form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union

PRIMITIVES = frozenset(
    {"int", "long", "short", "byte", "char", "boolean", "float", "double"}
)
VOID = "void"
STRING = "java.lang.String"
UNKNOWN = "?"
TYPE_ALIASES = {"String": STRING}
BUILTIN_TYPES = PRIMITIVES | {VOID, STRING}

COMPARISON_OPS = frozenset({"==", "!=", "<", "<=", ">", ">="})
ARITHMETIC_OPS = frozenset({"+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>", ">>>"})
BINARY_OPS = COMPARISON_OPS | ARITHMETIC_OPS
UNARY_OPS = frozenset({"!", "-"})
INVOKE_KINDS = ("static", "virtual", "special")


class IRError(Exception):
    """A syntax or validation error, located in the IR source."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 path: str | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.path = path

    def __str__(self) -> str:
        where = []
        if self.path:
            where.append(self.path)
        if self.line is not None:
            where.append(str(self.line))
            if self.col is not None:
                where.append(str(self.col))
        prefix = ":".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


def canonical_type(name: str) -> str:
    base = name.rstrip("[]")
    dims = name[len(base):]
    return TYPE_ALIASES.get(base, base) + dims


def element_type(name: str) -> str:
    return name[:-2] if name.endswith("[]") else UNKNOWN


def split_qualified(name: str) -> tuple[str, str]:
    """``a.b.C$D`` -> (``a.b``, ``C$D``)."""
    pkg, _, simple = name.rpartition(".")
    return pkg, simple


# ---------------------------------------------------------------------------
# Member references
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class MethodRef:
    class_name: str
    name: str
    params: tuple[str, ...]
    return_type: str

    @property
    def package(self) -> str:
        return split_qualified(self.class_name)[0]

    @property
    def simple_class(self) -> str:
        return split_qualified(self.class_name)[1]

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def dotted(self) -> str:
        return f"{self.class_name}.{self.name}"

    @property
    def signature(self) -> str:
        return f"<{self.class_name}: {self.return_type} {self.name}({','.join(self.params)})>"

    def __str__(self) -> str:
        return self.signature


@dataclass(frozen=True, order=True)
class FieldRef:
    class_name: str
    name: str
    type: str

    @property
    def package(self) -> str:
        return split_qualified(self.class_name)[0]

    @property
    def simple_class(self) -> str:
        return split_qualified(self.class_name)[1]

    @property
    def dotted(self) -> str:
        return f"{self.class_name}.{self.name}"

    @property
    def signature(self) -> str:
        return f"<{self.class_name}: {self.type} {self.name}>"

    def __str__(self) -> str:
        return self.signature


_METHOD_SIG = re.compile(
    r"^<?\s*(?P<cls>[\w$.]+)\s*:\s*(?P<ret>[\w$.\[\]?]+)\s+(?P<name>[\w$<>]+)"
    r"\((?P<params>[^)]*)\)\s*>?$"
)
_FIELD_SIG = re.compile(r"^<?\s*(?P<cls>[\w$.]+)\s*:\s*(?P<type>[\w$.\[\]?]+)\s+(?P<name>[\w$]+)\s*>?$")


def parse_method_signature(text: str) -> MethodRef:
    m = _METHOD_SIG.match(text.strip())
    if not m:
        raise ValueError(f"malformed method signature: {text!r}")
    params = tuple(canonical_type(p.strip()) for p in m["params"].split(",") if p.strip())
    return MethodRef(m["cls"], m["name"], params, canonical_type(m["ret"]))


def parse_field_signature(text: str) -> FieldRef:
    m = _FIELD_SIG.match(text.strip())
    if not m:
        raise ValueError(f"malformed field signature: {text!r}")
    return FieldRef(m["cls"], m["name"], canonical_type(m["type"]))


@dataclass(frozen=True, order=True)
class StmtRef:
    """A statement position: method plus index into its body."""

    method: MethodRef
    index: int

    def __str__(self) -> str:
        return f"{self.method.signature}#{self.index}"


# ---------------------------------------------------------------------------
# Values and expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Local:
    name: str


@dataclass(frozen=True)
class Const:
    kind: str  # int | bool | string | null
    value: object

    @classmethod
    def of(cls, value: object) -> "Const":
        if value is None:
            return cls("null", None)
        if isinstance(value, bool):
            return cls("bool", value)
        if isinstance(value, int):
            return cls("int", value)
        if isinstance(value, str):
            return cls("string", value)
        raise TypeError(f"unsupported constant {value!r}")

    @property
    def type(self) -> str:
        return {"int": "int", "bool": "boolean", "string": STRING, "null": "null"}[self.kind]


Value = Union[Local, Const]


@dataclass(frozen=True)
class FieldAccess:
    """A field named in source, before resolution against the hierarchy."""

    class_name: str
    name: str

    @property
    def dotted(self) -> str:
        return f"{self.class_name}.{self.name}"


@dataclass(frozen=True)
class FieldRead:
    field: FieldAccess
    base: Optional[str] = None


@dataclass(frozen=True)
class ArrayRead:
    array: str
    index: Value


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Value
    right: Value


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: Value


@dataclass(frozen=True)
class Cast:
    type: str
    operand: Value


@dataclass(frozen=True)
class New:
    type: str


@dataclass(frozen=True)
class LengthOf:
    operand: Value


@dataclass(frozen=True)
class InstanceOf:
    type: str
    operand: Value


Expr = Union[Local, Const, FieldRead, ArrayRead, BinOp, UnOp, Cast, New, LengthOf, InstanceOf]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Value
    right: Value


@dataclass(frozen=True)
class Negate:
    operand: Value


Cond = Union[Compare, Negate]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    local: str
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FieldWrite:
    field: FieldAccess
    base: Optional[str]
    value: Value
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ArrayWrite:
    array: str
    index: Value
    value: Value
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Invoke:
    result: Optional[str]
    kind: str
    class_name: str
    name: str
    args: tuple[Value, ...]
    receiver: Optional[str] = None
    line: int = field(default=0, compare=False)

    @property
    def arity(self) -> int:
        return len(self.args)

    def operand(self, position: int) -> Optional[Value]:
        """Receiver for ``-1``, argument otherwise; ``None`` when absent."""
        if position == -1:
            return Local(self.receiver) if self.receiver else None
        if 0 <= position < len(self.args):
            return self.args[position]
        return None


@dataclass(frozen=True)
class If:
    cond: Cond
    target: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Switch:
    local: str
    cases: tuple[tuple[Const, str], ...]
    default: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Goto:
    target: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Label:
    name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Throw:
    exc_type: str
    arg: Optional[str] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    value: Optional[Value] = None
    line: int = field(default=0, compare=False)


Statement = Union[Assign, FieldWrite, ArrayWrite, Invoke, If, Switch, Goto, Label, Throw, Return]
CONDITIONALS = (If, Switch)


def used_values(stmt: Statement) -> list[Value]:
    """Operands read by a statement (not including the defined local)."""
    if isinstance(stmt, Assign):
        return expr_operands(stmt.expr)
    if isinstance(stmt, FieldWrite):
        return ([Local(stmt.base)] if stmt.base else []) + [stmt.value]
    if isinstance(stmt, ArrayWrite):
        return [Local(stmt.array), stmt.index, stmt.value]
    if isinstance(stmt, Invoke):
        return ([Local(stmt.receiver)] if stmt.receiver else []) + list(stmt.args)
    if isinstance(stmt, If):
        return cond_operands(stmt.cond)
    if isinstance(stmt, Switch):
        return [Local(stmt.local)]
    if isinstance(stmt, Throw):
        return [Local(stmt.arg)] if stmt.arg else []
    if isinstance(stmt, Return):
        return [stmt.value] if stmt.value is not None else []
    return []


def expr_operands(expr: Expr) -> list[Value]:
    if isinstance(expr, (Local, Const)):
        return [expr]
    if isinstance(expr, FieldRead):
        return [Local(expr.base)] if expr.base else []
    if isinstance(expr, ArrayRead):
        return [Local(expr.array), expr.index]
    if isinstance(expr, BinOp):
        return [expr.left, expr.right]
    if isinstance(expr, (UnOp, Cast, LengthOf, InstanceOf)):
        return [expr.operand]
    return []


def cond_operands(cond: Cond) -> list[Value]:
    if isinstance(cond, Compare):
        return [cond.left, cond.right]
    return [cond.operand]


def defined_local(stmt: Statement) -> Optional[str]:
    if isinstance(stmt, Assign):
        return stmt.local
    if isinstance(stmt, Invoke):
        return stmt.result
    return None


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodDecl:
    owner: str
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    body: Optional[tuple[Statement, ...]]
    attributes: frozenset[str] = frozenset()
    line: int = field(default=0, compare=False)

    @cached_property
    def ref(self) -> MethodRef:
        return MethodRef(self.owner, self.name, tuple(t for _, t in self.params), self.return_type)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)

    @cached_property
    def labels(self) -> dict[str, int]:
        return {s.name: i for i, s in enumerate(self.body or ()) if isinstance(s, Label)}

    @cached_property
    def defs(self) -> dict[str, tuple[int, ...]]:
        """Local name -> indices of the statements defining it."""
        out: dict[str, list[int]] = {}
        for i, s in enumerate(self.body or ()):
            name = defined_local(s)
            if name is not None:
                out.setdefault(name, []).append(i)
        return {k: tuple(v) for k, v in out.items()}

    def param_index(self, local: str) -> Optional[int]:
        for i, (n, _) in enumerate(self.params):
            if n == local:
                return i
        return None

    def has(self, attribute: str) -> bool:
        return attribute in self.attributes


@dataclass(frozen=True)
class ClassDecl:
    name: str
    kind: str = "class"  # class | interface
    superclass: Optional[str] = None
    interfaces: tuple[str, ...] = ()
    fields: tuple[tuple[str, str], ...] = ()
    methods: tuple[MethodDecl, ...] = ()
    attributes: frozenset[str] = frozenset()
    line: int = field(default=0, compare=False)

    @property
    def is_interface(self) -> bool:
        return self.kind == "interface"

    @property
    def is_external(self) -> bool:
        return "external" in self.attributes

    @property
    def package(self) -> str:
        return split_qualified(self.name)[0]

    @property
    def simple_name(self) -> str:
        return split_qualified(self.name)[1]

    def field_type(self, name: str) -> Optional[str]:
        for n, t in self.fields:
            if n == name:
                return t
        return None


Member = Union[MethodRef, FieldRef]


def iter_statements(method: MethodDecl) -> Iterator[tuple[StmtRef, Statement]]:
    for i, s in enumerate(method.body or ()):
        yield StmtRef(method.ref, i), s
