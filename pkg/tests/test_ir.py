from __future__ import annotations

import pickle
import random

import pytest
from hypothesis import given, settings, strategies as st

from authmine.ir import IRError, MethodRef, build_cfg, dominators, back_edges, parse_program, render_program
from authmine.ir.model import If, Invoke, Switch, parse_method_signature

from conftest import UMS
from progen import random_program_text


def one_method(body: str, params: str = "", ret: str = "void") -> str:
    return f"class A {{\n  method m({params}) -> {ret} {{\n{body}\n  }}\n}}\n"


def test_fixture_parses(two_entry_program):
    m = two_entry_program.method(parse_method_signature(
        f"<{UMS}: boolean hasManageUsersPermission()>"))
    assert m is not None
    kinds = [type(s).__name__ for s in m.body]
    assert kinds.count("If") == 3
    assert sum(isinstance(s, Invoke) for s in m.body) == 3


def test_render_round_trip_on_fixture(two_entry_program):
    again = parse_program(render_program(two_entry_program))
    assert again == two_entry_program


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_render_round_trip_random(seed):
    p = parse_program(random_program_text(random.Random(seed)))
    assert parse_program(render_program(p)) == p


def test_pickle_round_trip(two_entry_program):
    clone = pickle.loads(pickle.dumps(two_entry_program))
    assert clone == two_entry_program
    assert clone.subtypes_of("java.lang.Throwable") == two_entry_program.subtypes_of("java.lang.Throwable")


def test_string_alias_and_statements():
    p = parse_program(one_method(
        "    s = const \"a\\\"b\"\n"
        "    n = lengthof arr\n"
        "    t = cast String s\n"
        "    k = arr[0]\n"
        "    arr[1] = k\n"
        "    b = instanceof String t\n"
        "    c = ! b\n"
        "    d = - k\n"
        "    switch k {\n      case 1: L1\n      case 2: L1\n      default: L2\n    }\n"
        "  L1:\n    return\n  L2:\n    return",
        params="arr: int[]"))
    m = p.method(MethodRef("A", "m", ("int[]",), "void"))
    assert p.local_types(m)["t"] == frozenset({"java.lang.String"})
    assert p.is_tracked_local(m, "k")
    assert not p.is_tracked_local(m, "arr")
    sw = next(s for s in m.body if isinstance(s, Switch))
    assert [c for c, _ in sw.cases] == [1, 2] or [c.value for c, _ in sw.cases] == [1, 2]


@pytest.mark.parametrize("text, fragment", [
    (one_method("    x = y\n    return"), "undefined local y"),
    (one_method("    goto Nowhere"), "Nowhere"),
    (one_method("    x = const 1"), "end"),
    (one_method("    invoke static A.m() on x\n    return"), "receiver"),
    (one_method("    invoke virtual A.m()\n    return"), "receiver"),
    ("class A extends B {\n}\nclass B extends A {\n}\n", "cycl"),
    ("class A {\n}\nclass A {\n}\n", "duplicate class"),
    ("class A extends Missing {\n}\n", "Missing"),
    (one_method("    x = const 1\n    return x"), "return"),
])
def test_validation_errors(text, fragment):
    with pytest.raises(IRError) as info:
        parse_program(text)
    assert fragment.lower() in str(info.value).lower()
    assert info.value.line is not None


def test_error_carries_line_number():
    with pytest.raises(IRError) as info:
        parse_program(one_method("    a = const 1\n    b = a\n    c = zz\n    return"))
    assert info.value.line == 5


def test_reserved_word_as_local_rejected():
    with pytest.raises(IRError):
        parse_program(one_method("    goto = const 1\n    return"))


# -- hierarchy -------------------------------------------------------------

def naive_subtypes(program, t):
    direct = {c.name: set(([c.superclass] if c.superclass else []) + list(c.interfaces))
              for c in program.classes}
    out = {t}
    changed = True
    while changed:
        changed = False
        for name, sups in direct.items():
            if name not in out and sups & out:
                out.add(name)
                changed = True
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_subtypes_match_transitive_closure(seed):
    p = parse_program(random_program_text(random.Random(seed)))
    for c in p.classes:
        assert p.subtypes_of(c.name) == naive_subtypes(p, c.name)
        for sub in p.subtypes_of(c.name):
            assert p.is_subtype(sub, c.name)


def test_lookup_prefers_superclass_over_interface():
    p = parse_program(
        "interface I {\n  method f() -> void\n}\n"
        "class B {\n  method f() -> void {\n    return\n  }\n}\n"
        "class C extends B implements I {\n}\n")
    assert p.lookup_method("C", "f", 0).ref.class_name == "B"


# -- control flow ----------------------------------------------------------

LOOP = one_method(
    "    i = const 0\n"
    "  Lhead:\n"
    "    if i >= n goto Lexit\n"
    "    i = i + 1\n"
    "    goto Lhead\n"
    "  Lexit:\n"
    "    return", params="n: int")


def test_cfg_successor_order():
    p = parse_program(LOOP)
    decl = next(p.methods())
    cfg = build_cfg(decl)
    cond = next(i for i, s in enumerate(decl.body) if isinstance(s, If))
    fall, target = cfg.succs[cond]
    assert fall == cond + 1
    assert target == decl.labels["Lexit"]


def test_back_edge_found():
    p = parse_program(LOOP)
    decl = next(p.methods())
    cfg = build_cfg(decl)
    edges = back_edges(cfg)
    assert len(edges) == 1
    tail, head = edges[0]
    assert head == decl.labels["Lhead"]


def oracle_dominators(cfg):
    """d dominates n iff n is unreachable from 0 once d is removed."""
    def reach(skip):
        seen, stack = set(), [0] if skip != 0 else []
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(v for v in cfg.succs[u] if v != skip)
        return seen
    base = reach(None)
    return {n: frozenset(d for d in base if d == n or n not in reach(d)) for n in base}


def random_cfg_method(rng: random.Random) -> str:
    n = rng.randint(2, 9)
    lines = ["    v = const 0"]
    for k in range(n):
        lines.append(f"  L{k}:")
        r = rng.random()
        target = f"L{rng.randrange(n)}"
        if r < 0.35:
            lines.append(f"    if v > {k} goto {target}")
        elif r < 0.5:
            lines.append(f"    goto {target}")
        elif r < 0.6:
            lines.append("    return")
        else:
            lines.append("    v = v + 1")
    lines.append("    return")
    return one_method("\n".join(lines))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_dominators_match_removal_oracle(seed):
    p = parse_program(random_cfg_method(random.Random(seed)))
    cfg = build_cfg(next(p.methods()))
    assert dominators(cfg) == oracle_dominators(cfg)
