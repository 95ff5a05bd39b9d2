"""Entry-point detection, exclude lists and per-entry-point CHA call graphs."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .errors import ConfigError
from .ir.model import UNKNOWN, Invoke, IRError, MethodDecl, MethodRef, StmtRef
from .ir.program import Program

PROCEDURES = (
    "class_path",
    "interface",
    "interface_all",
    "superclass",
    "superclass_all",
    "method_signature",
    "override",
)

CUT_OTHER_ENTRYPOINT = "other_entrypoint"
CUT_EXCLUDED = "excluded"
CUT_EXTERNAL = "external"


# ---------------------------------------------------------------------------
# Exclude list
# ---------------------------------------------------------------------------

_SIG_PATTERN = re.compile(
    r"^<?\s*(?P<cls>[\w$.]+)\s*:\s*(?P<ret>[\w$.\[\]]+)\s+(?P<name>[\w$<>]+)\s*"
    r"\((?P<params>[^)]*)\)\s*>?$"
)
_CLASS_PATTERN = re.compile(r"^[\w$]+(\.[\w$]+)*(\.\*|\$\*)?$")


@dataclass(frozen=True)
class SignaturePattern:
    """A method signature as written in an exclude list.

    Class and type components may be written fully qualified or by their
    simple name (``UserManagerService: void writeUserListLP()``).
    """

    class_name: str
    return_type: str
    name: str
    params: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "SignaturePattern":
        m = _SIG_PATTERN.match(text.strip())
        if not m:
            raise ValueError(f"malformed method signature {text!r}")
        params = tuple(p.strip() for p in m["params"].split(",") if p.strip())
        return cls(m["cls"], m["ret"], m["name"], params)

    def matches(self, ref: MethodRef) -> bool:
        if self.name != ref.name or len(self.params) != ref.arity:
            return False
        pairs = [(self.class_name, ref.class_name), (self.return_type, ref.return_type)]
        pairs += list(zip(self.params, ref.params))
        return all(_type_matches(p, t) for p, t in pairs)

    def __str__(self) -> str:
        return f"<{self.class_name}: {self.return_type} {self.name}({','.join(self.params)})>"


def _type_matches(pattern: str, actual: str) -> bool:
    if pattern == actual:
        return True
    if pattern == "String" and actual == "java.lang.String":
        return True
    return "." not in pattern and actual.rsplit(".", 1)[-1] == pattern


@dataclass(frozen=True)
class ExcludeList:
    class_path: tuple[str, ...] = ()
    interface: tuple[str, ...] = ()
    interface_all: tuple[str, ...] = ()
    superclass: tuple[str, ...] = ()
    superclass_all: tuple[str, ...] = ()
    method_signature: tuple[SignaturePattern, ...] = ()
    overrides: tuple[SignaturePattern, ...] = ()

    def __len__(self) -> int:
        return sum(len(getattr(self, p)) for p in
                   ("class_path", "interface", "interface_all", "superclass",
                    "superclass_all", "method_signature", "overrides"))

    def merged(self, other: "ExcludeList") -> "ExcludeList":
        return ExcludeList(**{
            name: getattr(self, name) + getattr(other, name)
            for name in self.__dataclass_fields__
        })


def parse_exclude_list(text: str, path: str | None = None) -> ExcludeList:
    """Parse ``procedure: pattern`` lines (``#`` starts a comment)."""
    buckets: dict[str, list] = {p: [] for p in PROCEDURES}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        proc, sep, pattern = line.partition(":")
        proc, pattern = proc.strip(), pattern.strip()
        if not sep or proc not in buckets:
            raise ConfigError(f"unknown exclusion procedure {proc!r}", lineno, path)
        if not pattern:
            raise ConfigError(f"empty pattern for {proc}", lineno, path)
        if proc in ("method_signature", "override"):
            try:
                buckets[proc].append(SignaturePattern.parse(pattern))
            except ValueError as exc:
                raise ConfigError(str(exc), lineno, path) from None
        else:
            if not _CLASS_PATTERN.match(pattern):
                raise ConfigError(f"malformed class pattern {pattern!r}", lineno, path)
            if proc != "class_path" and pattern.endswith("*"):
                raise ConfigError(f"wildcards are only allowed in class_path: {pattern!r}",
                                  lineno, path)
            buckets[proc].append(pattern)
    return ExcludeList(
        class_path=tuple(buckets["class_path"]),
        interface=tuple(buckets["interface"]),
        interface_all=tuple(buckets["interface_all"]),
        superclass=tuple(buckets["superclass"]),
        superclass_all=tuple(buckets["superclass_all"]),
        method_signature=tuple(buckets["method_signature"]),
        overrides=tuple(buckets["override"]),
    )


def class_path_matches(pattern: str, class_name: str) -> bool:
    if pattern.endswith(".*"):
        return class_name.startswith(pattern[:-1])
    if pattern.endswith("$*"):
        outer = pattern[:-2]
        return class_name == outer or class_name.startswith(outer + "$")
    return class_name == pattern


def _overridden_declarations(program: Program, ref: MethodRef) -> list[MethodDecl]:
    """Declarations with the same name and arity in every supertype of the
    declaring class, the class itself included."""
    out = []
    for sup in sorted(program.supertypes_of(ref.class_name)):
        d = program.declared_method(sup, ref.name, ref.arity)
        if d is not None:
            out.append(d)
    return out


def is_excluded(x: ExcludeList, m: MethodRef, program: Program) -> bool:
    if not len(x):
        return False
    known = program.has_class(m.class_name)
    if x.overrides:
        exempt = [m] + ([d.ref for d in _overridden_declarations(program, m)] if known else [])
        if any(p.matches(r) for p in x.overrides for r in exempt):
            return False
    if any(class_path_matches(p, m.class_name) for p in x.class_path):
        return True
    if any(p.matches(m) for p in x.method_signature):
        return True
    if not known:
        return False
    supertypes = program.supertypes_of(m.class_name)
    chain = program.superclass_chain(m.class_name)
    for name in x.interface:
        if name in supertypes and program.has_class(name) and program.class_(name).is_interface \
                and program.declared_method(name, m.name, m.arity) is not None:
            return True
    for name in x.interface_all:
        if name in supertypes and program.has_class(name) and program.class_(name).is_interface:
            return True
    for name in x.superclass:
        if name in chain and program.declared_method(name, m.name, m.arity) is not None:
            return True
    return any(name in chain for name in x.superclass_all)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntryPointConfig:
    explicit_attribute: Optional[str] = "entrypoint"
    stub_bases: tuple[str, ...] = ("android.os.Binder",)
    dispatch_method: Optional[str] = "onTransact"

    def __post_init__(self):
        if not self.explicit_attribute and not (self.stub_bases and self.dispatch_method):
            raise ValueError("no entry-point detection mechanism enabled")


def _handler_keys(dispatch: MethodDecl) -> set[tuple[str, int]]:
    keys = set()
    for s in dispatch.body or ():
        if isinstance(s, Invoke) and s.kind != "static" and s.receiver == "this" \
                and s.name != dispatch.name:
            keys.add((s.name, s.arity))
    return keys


def detect_entry_points(program: Program, config: EntryPointConfig = EntryPointConfig()
                        ) -> list[MethodRef]:
    found: set[MethodRef] = set()
    if config.explicit_attribute:
        for m in program.methods():
            if m.has(config.explicit_attribute) and m.body is not None:
                found.add(m.ref)
    if config.dispatch_method:
        for base in config.stub_bases:
            if not program.has_class(base):
                continue
            for stub_name in sorted(program.subtypes_of(base) - {base}):
                stub = program.class_(stub_name)
                if stub.is_interface:
                    continue
                keys: set[tuple[str, int]] = set()
                for m in stub.methods:
                    if m.name == config.dispatch_method and m.body is not None:
                        keys |= _handler_keys(m)
                if not keys:
                    continue
                for sub in program.subtypes_of(stub_name):
                    for m in program.class_(sub).methods:
                        if (m.name, m.arity) in keys and m.body is not None:
                            found.add(m.ref)
    return sorted(found)


# ---------------------------------------------------------------------------
# Call graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CallGraph:
    root: MethodRef
    nodes: tuple[MethodRef, ...]
    edges: dict[StmtRef, tuple[MethodRef, ...]]
    cut_reasons: dict[MethodRef, str]
    unresolved: tuple[StmtRef, ...] = ()

    @cached_property
    def node_set(self) -> frozenset[MethodRef]:
        return frozenset(self.nodes)

    @cached_property
    def call_sites_of(self) -> dict[MethodRef, tuple[StmtRef, ...]]:
        """Target -> sorted call sites (inside graph nodes) that may call it."""
        out: dict[MethodRef, list[StmtRef]] = {}
        for site, targets in self.edges.items():
            for t in targets:
                out.setdefault(t, []).append(site)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    def expanded_targets(self, site: StmtRef) -> tuple[MethodRef, ...]:
        """Targets of ``site`` whose bodies belong to this graph."""
        return tuple(t for t in self.edges.get(site, ()) if t not in self.cut_reasons)

    def cut_targets(self, site: StmtRef) -> tuple[MethodRef, ...]:
        return tuple(t for t in self.edges.get(site, ()) if t in self.cut_reasons)

    def callees(self, method: MethodRef) -> set[MethodRef]:
        return {t for site, ts in self.edges.items() if site.method == method for t in ts}

    def to_dict(self) -> dict:
        return {
            "root": self.root.signature,
            "nodes": [n.signature for n in self.nodes],
            "edges": [
                {"site": str(site), "targets": [t.signature for t in targets]}
                for site, targets in sorted(self.edges.items())
            ],
            "cuts": {m.signature: r for m, r in sorted(self.cut_reasons.items())},
            "unresolved": [str(s) for s in self.unresolved],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _dispatch(program: Program, cls: str, name: str, arity: int) -> Optional[MethodDecl]:
    """Nearest concrete declaration up the superclass chain of ``cls``."""
    for c in program.superclass_chain(cls):
        d = program.declared_method(c, name, arity)
        if d is not None and program.is_concrete(d):
            return d
    return None


def invoke_targets(program: Program, stmt: Invoke) -> tuple[list[MethodRef], bool]:
    """CHA targets of an invoke and whether resolution succeeded."""
    if stmt.kind != "virtual":
        d = program.lookup_method(stmt.class_name, stmt.name, stmt.arity)
        return ([d.ref], True) if d is not None else ([], False)
    found: set[MethodRef] = set()
    for sub in program.subtypes_of(stmt.class_name):
        if program.class_(sub).is_interface:
            continue
        d = _dispatch(program, sub, stmt.name, stmt.arity)
        if d is not None:
            found.add(d.ref)
    if not found:
        d = program.lookup_method(stmt.class_name, stmt.name, stmt.arity)
        if d is None:
            return [], False
        found.add(d.ref)
    return sorted(found), True


def unresolved_ref(stmt: Invoke) -> MethodRef:
    return MethodRef(stmt.class_name, stmt.name, (UNKNOWN,) * stmt.arity, UNKNOWN)


def build_cha_callgraph(program: Program, root: MethodRef, x: ExcludeList = ExcludeList(),
                        all_eps: Iterable[MethodRef] = ()) -> CallGraph:
    root_decl = program.method(root)
    if root_decl is None or root_decl.body is None:
        raise IRError(f"call graph root {root.signature} has no body")
    eps = frozenset(all_eps)
    nodes = {root}
    edges: dict[StmtRef, tuple[MethodRef, ...]] = {}
    cuts: dict[MethodRef, str] = {}
    unresolved: list[StmtRef] = []
    excluded_cache: dict[MethodRef, bool] = {}
    work = deque([root_decl])
    while work:
        decl = work.popleft()
        for i, s in enumerate(decl.body):
            if not isinstance(s, Invoke):
                continue
            site = StmtRef(decl.ref, i)
            targets, ok = invoke_targets(program, s)
            if not ok:
                targets = [unresolved_ref(s)]
                unresolved.append(site)
            edges[site] = tuple(targets)
            for t in targets:
                if t in nodes and t not in eps:
                    continue
                if t in cuts:
                    continue
                if t in eps:
                    cuts[t] = CUT_OTHER_ENTRYPOINT
                    continue
                if t not in excluded_cache:
                    excluded_cache[t] = is_excluded(x, t, program)
                if excluded_cache[t]:
                    cuts[t] = CUT_EXCLUDED
                    continue
                target_decl = program.method(t)
                if target_decl is None or target_decl.body is None:
                    cuts[t] = CUT_EXTERNAL
                    continue
                nodes.add(t)
                work.append(target_decl)
    return CallGraph(root, tuple(sorted(nodes)), dict(sorted(edges.items())), dict(sorted(cuts.items())),
                     tuple(sorted(unresolved)))
