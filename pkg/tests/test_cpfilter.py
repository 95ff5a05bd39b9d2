from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from authmine.callgraph import build_cha_callgraph, detect_entry_points
from authmine.cpfilter import (
    FIELD,
    METHOD_RETURN,
    STRING_CONST,
    FilterSpec,
    IsInArithmeticChain,
    KeepRule,
    Restrictions,
    collect_candidate,
    detect_loop_conditionals,
    evaluate_filter,
    is_in_arithmetic_chain,
    loop_conditionals_from_back_edges,
    parse_filter,
    rule_fires,
)
from authmine.errors import ConfigError
from authmine.ir import StmtRef, build_cfg, load_program, parse_program
from authmine.ir.model import If, Switch
from authmine.matchlang import parse_matcher

from conftest import DATA_DIR, FIXTURE_DIR

AMS = "com.android.server.am.ActivityManagerService"
SPEC = parse_filter((FIXTURE_DIR / "filter.xml").read_text(), "filter.xml")


@pytest.fixture(scope="module")
def dump_heap():
    p = load_program([DATA_DIR / "dumpheap.ir"])
    (entry,) = detect_entry_points(p)
    return p, build_cha_callgraph(p, entry)


def conditional_at(program, graph, label_after):
    """The conditional immediately following ``label_after`` in dumpHeap."""
    decl = program.method(graph.root)
    start = decl.labels[label_after]
    i = next(i for i in range(start, len(decl.body)) if isinstance(decl.body[i], If))
    return StmtRef(decl.ref, i)


def test_printed_filter_rules_parse():
    assert [r.kind for r in SPEC.rules] == ["KeepFieldValueUse", "KeepMethodReturnValueUse"]
    flag_rule = SPEC.rules[0]
    assert flag_rule.restrictions.items == (IsInArithmeticChain(False),)
    union = SPEC.rules[1].restrictions.items[1]
    assert union.use_union and [r.position for r in union.items] == [-1, 0]


def test_flag_field_conditional_kept(dump_heap):
    p, g = dump_heap
    ref = conditional_at(p, g, "Lallowed")
    decl = p.method(ref.method)
    ref = StmtRef(ref.method, max(i for i, s in enumerate(decl.body) if isinstance(s, If)))
    cand = collect_candidate(p, g, ref)
    assert {e.key for e in cand.of_kind(FIELD)} == {
        "<android.content.pm.ApplicationInfo: int flags>",
        "<android.content.pm.ApplicationInfo: int FLAG_DEBUGGABLE>"}
    assert rule_fires(SPEC.rules[0], cand)
    assert not rule_fires(SPEC.rules[1], cand)
    assert evaluate_filter(SPEC, cand)
    assert not evaluate_filter(FilterSpec(), cand)


def test_system_properties_equals_kept(dump_heap):
    p, g = dump_heap
    ref = conditional_at(p, g, "Lallowed")
    cand = collect_candidate(p, g, ref)
    kinds = {(e.kind, e.key) for e in cand.elements}
    assert (STRING_CONST, "ro.debuggable") in kinds
    assert (METHOD_RETURN, "<java.lang.String: boolean equals(java.lang.Object)>") in kinds
    assert rule_fires(SPEC.rules[1], cand)
    assert not rule_fires(SPEC.rules[0], cand)


def test_equals_rule_needs_the_property_key(dump_heap):
    p, _ = dump_heap
    text = (DATA_DIR / "dumpheap.ir").read_text().replace('"ro.debuggable"', '"persist.sys.locale"')
    p2 = parse_program(text)
    (entry,) = detect_entry_points(p2)
    g2 = build_cha_callgraph(p2, entry)
    cand = collect_candidate(p2, g2, conditional_at(p2, g2, "Lallowed"))
    assert not rule_fires(SPEC.rules[1], cand)


def test_cq_return_in_arithmetic_chain_kept(dump_heap):
    p, g = dump_heap
    decl = p.method(g.root)
    first_if = next(i for i, s in enumerate(decl.body) if isinstance(s, If))
    cand = collect_candidate(p, g, StmtRef(decl.ref, first_if))
    cq = next(e.member for e in cand.of_kind(METHOD_RETURN) if e.member.name == "checkCallingPermission")
    assert not evaluate_filter(FilterSpec(), cand)
    assert evaluate_filter(FilterSpec(), cand, cqs={cq})


def test_conditional_inside_cq_kept_and_loops_rejected(dump_heap):
    p, g = dump_heap
    decl = next(m for m in p.methods() if m.name == "checkComponentPermission")
    ref = StmtRef(decl.ref, next(i for i, s in enumerate(decl.body) if isinstance(s, If)))
    cand = collect_candidate(p, g, ref)
    assert evaluate_filter(FilterSpec(), cand, cqs={decl.ref})
    assert not evaluate_filter(FilterSpec(), cand, loop_set={ref}, cqs={decl.ref})


# -- arithmetic chains -----------------------------------------------------

CHAIN = parse_program(
    "class k.Flags {\n  field FLAG_X: int\n  method wrap(v: int) -> int {\n    return v\n  }\n"
    "  method m(a: int) -> void {\n"
    "    f = field k.Flags.FLAG_X\n"
    "    g = f + 1\n"
    "    if g == 0 goto L1\n"
    "    w = invoke static k.Flags.wrap(f)\n"
    "    if 0 == w goto L1\n"
    "    s = const \"lit\"\n"
    "    if s == a goto L1\n"
    "  L1:\n    return\n  }\n}\n")


def chain_candidates():
    decl = next(m for m in CHAIN.methods() if m.name == "m")
    g = build_cha_callgraph(CHAIN, decl.ref)
    ifs = [i for i, s in enumerate(decl.body) if isinstance(s, If)]
    return [collect_candidate(CHAIN, g, StmtRef(decl.ref, i)) for i in ifs]


def test_field_through_operator_is_arithmetic():
    direct, _, _ = chain_candidates()
    (e,) = direct.of_kind(FIELD)
    assert [s.kind for s in e.chain] == ["op"]
    assert is_in_arithmetic_chain(e)


def test_field_passed_to_call_is_not_arithmetic():
    _, through_call, _ = chain_candidates()
    (e,) = through_call.of_kind(FIELD)
    assert any(s.kind == "arg" for s in e.chain)
    assert not is_in_arithmetic_chain(e)
    rule = KeepRule("KeepFieldValueUse", parse_matcher("(regex-name-words `\\bflag\\b`)"),
                    Restrictions((IsInArithmeticChain(),)))
    assert not rule_fires(rule, through_call)
    assert rule_fires(rule, chain_candidates()[0])


def test_handle_constants():
    _, _, const_cmp = chain_candidates()
    (e,) = const_cmp.of_kind(STRING_CONST)
    assert not is_in_arithmetic_chain(e, handle_constants=False)
    assert is_in_arithmetic_chain(e, handle_constants=True)


# -- filter document errors -------------------------------------------------

@pytest.mark.parametrize("doc", [
    "<Filter><KeepBogus Value='(equals-name a)'/></Filter>",
    "<Filter><KeepFieldValueUse/></Filter>",
    "<Filter><KeepFieldValueUse Value='(nope-name a)'/></Filter>",
    "<Filter><KeepFieldValueUse Value='(equals-name a)'><Restrictions>"
    "<IsValueUsedInMethodCall Position='x'><Matcher class='MethodMatcher' Value='(equals-name a)'/>"
    "</IsValueUsedInMethodCall></Restrictions></KeepFieldValueUse></Filter>",
    "<Filter><KeepFieldValueUse Value='(equals-name a)'><Restrictions UseUnion='maybe'/>"
    "</KeepFieldValueUse></Filter>",
    "<Filter><KeepFieldValueUse",
])
def test_filter_errors(doc):
    with pytest.raises(ConfigError) as info:
        parse_filter(doc, "f.xml")
    assert info.value.path == "f.xml"
    assert info.value.line == 1


def test_filter_error_line_number():
    doc = "<Filter>\n  <KeepFieldValueUse Value='(equals-name a)'>\n    <Restrictions>\n" \
          "      <Bogus/>\n    </Restrictions>\n  </KeepFieldValueUse>\n</Filter>\n"
    with pytest.raises(ConfigError) as info:
        parse_filter(doc, "f.xml")
    assert str(info.value).startswith("f.xml:4:")


def test_boolean_combinators():
    spec = parse_filter(
        "<Filter><Not><KeepMethodContainerUse Value='(equals-name m)'/></Not>"
        "<And><KeepMethodContainerUse Value='(equals-name m)'/>"
        "<KeepFieldValueUse Value='(contains-name FLAG)'/></And></Filter>")
    direct, through_call, const_cmp = chain_candidates()
    assert evaluate_filter(spec, direct)
    assert not evaluate_filter(spec, const_cmp)


# -- loop conditionals -----------------------------------------------------

def structured_method(rng: random.Random, depth: int = 0, counter=None) -> list[str]:
    """Nested while/if blocks, so every control flow graph is reducible."""
    counter = counter if counter is not None else [0]
    lines = []
    for _ in range(rng.randint(1, 3)):
        counter[0] += 1
        n = counter[0]
        r = rng.random()
        if r < 0.35 and depth < 3:
            lines += [f"  H{n}:", f"    if v > {n} goto X{n}"]
            lines += structured_method(rng, depth + 1, counter)
            lines += [f"    goto H{n}", f"  X{n}:"]
        elif r < 0.55 and depth < 3:
            lines += [f"  D{n}:"]
            lines += structured_method(rng, depth + 1, counter)
            lines += [f"    if v < {n} goto D{n}"]
        elif r < 0.75:
            lines += [f"    if v == {n} goto S{n}"]
            lines += structured_method(rng, depth + 1, counter) if depth < 3 else ["    v = v + 1"]
            lines += [f"  S{n}:"]
        else:
            lines += ["    v = v + 1"]
    return lines


def dfs_back_edges(cfg):
    on_stack, done, out = set(), set(), []

    def visit(u):
        on_stack.add(u)
        for v in cfg.unique_succs(u):
            if v in on_stack:
                out.append((u, v))
            elif v not in done:
                visit(v)
        on_stack.discard(u)
        done.add(u)

    visit(0)
    return out


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_loop_conditionals_match_dfs_oracle(seed):
    body = ["    v = const 0"] + structured_method(random.Random(seed)) + ["    return"]
    p = parse_program("class A {\n  method m() -> void {\n" + "\n".join(body) + "\n  }\n}\n")
    cfg = build_cfg(next(p.methods()))
    expected = loop_conditionals_from_back_edges(cfg, dfs_back_edges(cfg))
    assert {r.index for r in detect_loop_conditionals(cfg)} == expected


def test_while_and_do_while_heads():
    p = parse_program(
        "class A {\n  method m(n: int) -> void {\n    i = const 0\n"
        "  Lw:\n    if i >= n goto Ld\n    i = i + 1\n    goto Lw\n"
        "  Ld:\n    i = i - 1\n    if i > 0 goto Ld\n"
        "    if n == 3 goto Lend\n"
        "  Lend:\n    return\n  }\n}\n")
    decl = next(p.methods())
    found = {r.index for r in detect_loop_conditionals(build_cfg(decl))}
    ifs = [i for i, s in enumerate(decl.body) if isinstance(s, (If, Switch))]
    assert found == set(ifs[:2])
