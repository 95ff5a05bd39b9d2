"""Resolved program: class table, type hierarchy, member lookup, validation."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator, Optional

from .model import (
    BUILTIN_TYPES,
    PRIMITIVES,
    STRING,
    UNKNOWN,
    ArrayRead,
    ArrayWrite,
    Assign,
    BinOp,
    Cast,
    ClassDecl,
    COMPARISON_OPS,
    Const,
    FieldAccess,
    FieldRead,
    FieldRef,
    FieldWrite,
    Goto,
    If,
    InstanceOf,
    Invoke,
    IRError,
    Label,
    LengthOf,
    Local,
    MethodDecl,
    MethodRef,
    New,
    Return,
    Switch,
    Throw,
    UnOp,
    element_type,
    used_values,
)

TRACKED_TYPES = PRIMITIVES | {STRING, "null", UNKNOWN}


class Program:
    """An immutable, fully resolved set of class declarations."""

    def __init__(self, classes: Iterable[ClassDecl] = (), *, path: str | None = None):
        self.classes: tuple[ClassDecl, ...] = tuple(classes)
        self._path = path
        self._by_name: dict[str, ClassDecl] = {}
        for c in self.classes:
            if c.name in self._by_name:
                raise IRError(f"duplicate class {c.name}", c.line, path=path)
            self._by_name[c.name] = c
        self._methods: dict[MethodRef, MethodDecl] = {}
        self._declared: dict[tuple[str, str, int], MethodDecl] = {}
        for c in self.classes:
            for m in c.methods:
                key = (c.name, m.name, m.arity)
                if key in self._declared:
                    raise IRError(f"duplicate method {c.name}.{m.name}/{m.arity}", m.line, path=path)
                self._declared[key] = m
                self._methods[m.ref] = m
        self._validate_hierarchy()
        self._supertypes: dict[str, frozenset[str]] = {}
        self._subtypes: dict[str, set[str]] = {name: set() for name in self._by_name}
        for name in self._by_name:
            for sup in self.supertypes_of(name):
                self._subtypes[sup].add(name)
        self._frozen_subtypes = {k: frozenset(v) for k, v in self._subtypes.items()}
        self._lookup_cache: dict[tuple[str, str, int], Optional[MethodDecl]] = {}
        self._type_cache: dict[MethodRef, dict[str, frozenset[str]]] = {}
        self._validate_members()

    # -- equality ------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Program) and self.classes == other.classes

    def __hash__(self) -> int:
        return hash(self.classes)

    def __repr__(self) -> str:
        return f"Program({len(self.classes)} classes)"

    def __getstate__(self):
        return {"classes": self.classes, "path": self._path}

    def __setstate__(self, state):
        self.__init__(state["classes"], path=state["path"])

    # -- lookup --------------------------------------------------------------

    def has_class(self, name: str) -> bool:
        return name in self._by_name

    def class_(self, name: str) -> ClassDecl:
        try:
            return self._by_name[name]
        except KeyError:
            raise IRError(f"unknown type {name}") from None

    def methods(self) -> Iterator[MethodDecl]:
        for c in self.classes:
            yield from c.methods

    def method(self, ref: MethodRef) -> Optional[MethodDecl]:
        return self._methods.get(ref)

    def declared_method(self, class_name: str, name: str, arity: int) -> Optional[MethodDecl]:
        return self._declared.get((class_name, name, arity))

    def lookup_method(self, class_name: str, name: str, arity: int) -> Optional[MethodDecl]:
        """Nearest declaration visible from ``class_name``: superclass chain
        first, then interfaces breadth-first."""
        key = (class_name, name, arity)
        if key not in self._lookup_cache:
            self._lookup_cache[key] = self._lookup(class_name, name, arity)
        return self._lookup_cache[key]

    def _lookup(self, class_name: str, name: str, arity: int) -> Optional[MethodDecl]:
        for c in self.superclass_chain(class_name):
            d = self._declared.get((c, name, arity))
            if d is not None:
                return d
        seen: set[str] = set()
        queue = deque(self.superclass_chain(class_name))
        while queue:
            c = queue.popleft()
            if c in seen or c not in self._by_name:
                continue
            seen.add(c)
            d = self._declared.get((c, name, arity))
            if d is not None:
                return d
            queue.extend(self._by_name[c].interfaces)
        return None

    def resolve_invoke(self, stmt: Invoke) -> Optional[MethodRef]:
        d = self.lookup_method(stmt.class_name, stmt.name, stmt.arity)
        return d.ref if d is not None else None

    def resolve_field(self, access: FieldAccess) -> FieldRef:
        for c in self.superclass_chain(access.class_name):
            t = self._by_name[c].field_type(access.name)
            if t is not None:
                return FieldRef(c, access.name, t)
        return FieldRef(access.class_name, access.name, UNKNOWN)

    def is_concrete(self, method: MethodDecl) -> bool:
        """Has a body, or is a library stub declared on an external class."""
        if method.body is not None:
            return True
        owner = self._by_name.get(method.owner)
        return owner is not None and owner.is_external and not owner.is_interface

    # -- hierarchy -----------------------------------------------------------

    def superclass_chain(self, name: str) -> list[str]:
        out = []
        cur: Optional[str] = name
        while cur is not None and cur in self._by_name and cur not in out:
            out.append(cur)
            cur = self._by_name[cur].superclass
        return out

    def supertypes_of(self, name: str) -> frozenset[str]:
        """Reflexive-transitive closure over extends/implements."""
        if name not in self._by_name:
            raise IRError(f"unknown type {name}")
        cached = self._supertypes.get(name)
        if cached is not None:
            return cached
        seen: set[str] = set()
        stack = [name]
        while stack:
            c = stack.pop()
            if c in seen:
                continue
            seen.add(c)
            decl = self._by_name[c]
            if decl.superclass:
                stack.append(decl.superclass)
            stack.extend(decl.interfaces)
        result = frozenset(seen)
        self._supertypes[name] = result
        return result

    def subtypes_of(self, name: str) -> frozenset[str]:
        if name not in self._by_name:
            raise IRError(f"unknown type {name}")
        return self._frozen_subtypes[name]

    def is_subtype(self, sub: str, sup: str) -> bool:
        if sub == sup:
            return True
        if sub not in self._by_name:
            return False
        return sup in self.supertypes_of(sub)

    # -- local types ---------------------------------------------------------

    def local_types(self, method: MethodDecl) -> dict[str, frozenset[str]]:
        """Flow-insensitive types of every local, inferred from its defs."""
        cached = self._type_cache.get(method.ref)
        if cached is not None:
            return cached
        types: dict[str, set[str]] = {"this": {method.owner}}
        for n, t in method.params:
            types[n] = {t}
        body = method.body or ()
        changed = True
        while changed:
            changed = False
            for s in body:
                if isinstance(s, Assign):
                    new = self._expr_types(s.expr, types)
                    name = s.local
                elif isinstance(s, Invoke) and s.result:
                    target = self.resolve_invoke(s)
                    new = {target.return_type if target else UNKNOWN}
                    name = s.result
                else:
                    continue
                cur = types.setdefault(name, set())
                if not new <= cur:
                    cur |= new
                    changed = True
        result = {k: frozenset(v) for k, v in types.items()}
        self._type_cache[method.ref] = result
        return result

    def _expr_types(self, expr, types: dict[str, set[str]]) -> set[str]:
        if isinstance(expr, Const):
            return {expr.type}
        if isinstance(expr, Local):
            return set(types.get(expr.name, ()))
        if isinstance(expr, FieldRead):
            return {self.resolve_field(expr.field).type}
        if isinstance(expr, ArrayRead):
            return {element_type(t) for t in types.get(expr.array, ())} or {UNKNOWN}
        if isinstance(expr, BinOp):
            if expr.op in COMPARISON_OPS:
                return {"boolean"}
            operand_types = self._expr_types(expr.left, types) | self._expr_types(expr.right, types)
            return {STRING} if STRING in operand_types else {"int"}
        if isinstance(expr, UnOp):
            return {"boolean"} if expr.op == "!" else self._expr_types(expr.operand, types)
        if isinstance(expr, (Cast, New)):
            return {expr.type}
        if isinstance(expr, LengthOf):
            return {"int"}
        if isinstance(expr, InstanceOf):
            return {"boolean"}
        return {UNKNOWN}

    def is_tracked_local(self, method: MethodDecl, local: str) -> bool:
        """True when every inferred type is primitive, string, or unknown."""
        return self.local_types(method).get(local, frozenset()) <= TRACKED_TYPES

    # -- validation ----------------------------------------------------------

    def _err(self, msg: str, line: int) -> IRError:
        return IRError(msg, line, path=self._path)

    def _check_type(self, t: str, line: int) -> None:
        base = t.rstrip("[]")
        if base not in BUILTIN_TYPES and base not in self._by_name:
            raise self._err(f"unresolved type {base}", line)

    def _validate_hierarchy(self) -> None:
        for c in self.classes:
            if c.superclass is not None:
                sup = self._by_name.get(c.superclass)
                if sup is None:
                    raise self._err(f"unresolved type {c.superclass}", c.line)
                if sup.is_interface:
                    raise self._err(f"{c.name} extends interface {c.superclass}", c.line)
            for i in c.interfaces:
                idecl = self._by_name.get(i)
                if idecl is None:
                    raise self._err(f"unresolved type {i}", c.line)
                if not idecl.is_interface:
                    raise self._err(f"{c.name} implements non-interface {i}", c.line)
        # cycles in extends/implements
        state: dict[str, int] = {}

        def visit(name: str) -> None:
            state[name] = 1
            decl = self._by_name[name]
            for sup in ([decl.superclass] if decl.superclass else []) + list(decl.interfaces):
                if state.get(sup) == 1:
                    raise self._err(f"cyclic inheritance through {sup}", decl.line)
                if sup not in state:
                    visit(sup)
            state[name] = 2

        for c in self.classes:
            if c.name not in state:
                visit(c.name)

    def _validate_members(self) -> None:
        for c in self.classes:
            seen_fields: set[str] = set()
            for fname, ftype in c.fields:
                if fname in seen_fields:
                    raise self._err(f"duplicate field {c.name}.{fname}", c.line)
                seen_fields.add(fname)
                self._check_type(ftype, c.line)
            for m in c.methods:
                self._validate_method(c, m)

    def _validate_method(self, c: ClassDecl, m: MethodDecl) -> None:
        for _, t in m.params:
            self._check_type(t, m.line)
        self._check_type(m.return_type, m.line)
        bodiless = c.is_interface or c.is_external
        if bodiless and m.body is not None:
            raise self._err(f"{c.name}.{m.name}: interface and external methods have no body", m.line)
        if not bodiless and m.body is None:
            raise self._err(f"{c.name}.{m.name}: missing body", m.line)
        if m.body is None:
            return
        if not m.body:
            raise self._err(f"{c.name}.{m.name}: empty body", m.line)
        labels: set[str] = set()
        for s in m.body:
            if isinstance(s, Label):
                if s.name in labels:
                    raise self._err(f"duplicate label {s.name}", s.line)
                labels.add(s.name)
        defined = {"this"} | set(m.param_names) | set(m.defs)
        for s in m.body:
            for target in _jump_targets(s):
                if target not in labels:
                    raise self._err(f"dangling label {target}", s.line)
            for v in used_values(s):
                if isinstance(v, Local) and v.name not in defined:
                    raise self._err(f"undefined local {v.name}", s.line)
            for t in _named_types(s):
                self._check_type(t, s.line)
            if isinstance(s, Return) and (s.value is None) != (m.return_type == "void"):
                what = "a value" if m.return_type != "void" else "no value"
                raise self._err(f"{c.name}.{m.name} must return {what}", s.line)
            if isinstance(s, Invoke) and not self.has_class(s.class_name):
                raise self._err(f"unresolved type {s.class_name}", s.line)
            for access in _field_accesses(s):
                if not self.has_class(access.class_name):
                    raise self._err(f"unresolved type {access.class_name}", s.line)
        if not isinstance(m.body[-1], (Return, Throw, Goto)):
            raise self._err(f"{c.name}.{m.name}: control falls off the end of the body",
                            getattr(m.body[-1], "line", m.line))


def _jump_targets(s) -> list[str]:
    if isinstance(s, (If, Goto)):
        return [s.target]
    if isinstance(s, Switch):
        return [lbl for _, lbl in s.cases] + [s.default]
    return []


def _named_types(s) -> list[str]:
    if isinstance(s, Assign) and isinstance(s.expr, (Cast, New, InstanceOf)):
        return [s.expr.type]
    if isinstance(s, Throw):
        return [s.exc_type]
    return []


def _field_accesses(s) -> list[FieldAccess]:
    if isinstance(s, Assign) and isinstance(s.expr, FieldRead):
        return [s.expr.field]
    if isinstance(s, FieldWrite):
        return [s.field]
    return []


def subtypes_of(program: Program, type_name: str) -> frozenset[str]:
    """Every class or interface that is ``type_name`` or extends/implements it."""
    return program.subtypes_of(type_name)
