from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from authmine.rulemine import (
    DEFAULT_MINCONF,
    AssociationRule,
    TransactionDB,
    brute_force_closed,
    filter_rules,
    generate_targeted_rules,
    mark_consistent,
    min_count,
    mine_closed_itemsets,
    mine_service,
    parse_minconf,
    parse_minsup,
    rules_from_json,
    rules_to_json,
)

import rule_oracle
from rule_oracle import random_db

# Three entry points of the user-restriction example, abbreviated.
VALID = "CP[0 ; isValidRestriction(ALL)]"
RESTRICTION_DB = [
    ("hasBaseUserRestriction", {VALID, "CP[0 ; hasManageUsersPermission()]", "CP[perm ; GRANTED]",
                                "CP[uid ; ROOT_UID]", "CP[0 ; isSameApp(uid, SYSTEM_UID)]",
                                'CQ[checkManageUsersPermission("hasBaseUserRestriction")]'}),
    ("hasUserRestriction", {VALID}),
    ("setUserRestriction", {VALID, "CP[0 ; hasManageUsersPermission()]", "CP[perm ; GRANTED]",
                            "CP[uid ; ROOT_UID]", "CP[0 ; isSameApp(uid, SYSTEM_UID)]",
                            'CQ[checkManageUsersPermission("setUserRestriction")]'}),
]


def test_defaults():
    assert DEFAULT_MINCONF == Fraction(85, 100)
    assert parse_minsup("2/E", 3) == Fraction(2, 3)
    assert parse_minsup("2/E", 50) == Fraction(1, 25)


def test_min_count_is_exact():
    assert min_count(Fraction(2, 3), 3) == 2
    assert min_count(Fraction(1, 2), 3) == 2
    assert min_count(Fraction(1, 3), 3) == 1
    assert min_count(Fraction(1, 100), 3) == 1


@pytest.mark.parametrize("bad", ["0", "1.5", "-0.2", "abc"])
def test_minconf_range(bad):
    with pytest.raises(ValueError):
        parse_minconf(bad)


def test_restriction_closed_sets():
    db = TransactionDB.from_sets([s for _, s in RESTRICTION_DB], [n for n, _ in RESTRICTION_DB])
    closed = mine_closed_itemsets(db, Fraction(2, 3))
    shapes = sorted((len(c.items), c.support_count) for c in closed)
    assert shapes == [(1, 3), (5, 2)]
    assert closed == brute_force_closed(db, Fraction(2, 3))


def test_restriction_rule():
    res = mine_service("UserManagerService", RESTRICTION_DB, Fraction(6, 10), "2/E")
    (rule,) = res.rules
    assert rule.target == "hasUserRestriction"
    assert rule.antecedent == (VALID,)
    assert len(rule.consequent) == 4
    assert rule.confidence == Fraction(2, 3)
    assert rule.supporters == ("hasBaseUserRestriction", "setUserRestriction")
    assert mine_service("UserManagerService", RESTRICTION_DB).rules == ()


def test_single_entry_service_is_skipped():
    assert mine_service("S", RESTRICTION_DB[:1], Fraction(1, 10)).rules == ()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_closed_itemsets_match_brute_force(seed):
    db, minsup = random_db(random.Random(seed))
    mined = mine_closed_itemsets(db, minsup)
    assert mined == brute_force_closed(db, minsup)
    assert {c.items: c.supporters for c in mined} == rule_oracle.closed_sets(db, minsup)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Fraction(1, 2), Fraction(2, 3), Fraction(85, 100), Fraction(1)]))
def test_targeted_rules_complete_and_sound(seed, minconf):
    db, minsup = random_db(random.Random(seed))
    closed = mine_closed_itemsets(db, minsup)
    for j in range(db.size):
        got = {(r.antecedent, r.consequent, r.support, r.confidence)
               for r in generate_targeted_rules(db, closed, j, minconf)}
        assert got == rule_oracle.targeted_rules(db, minsup, minconf, j)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Fraction(1, 2), Fraction(85, 100)]))
def test_every_confident_rule_is_covered(seed, minconf):
    """Closure-based losslessness: a confident rule X => Y' over any frequent
    itemset is subsumed by an emitted rule with the same support, an
    antecedent containing X, a consequent containing Y', and confidence at
    least as high."""
    db, minsup = random_db(random.Random(seed))
    closed = mine_closed_itemsets(db, minsup)
    for j in range(db.size):
        emitted = generate_targeted_rules(db, closed, j, minconf)
        for x, y, sup, conf in rule_oracle.confident_rules_from_frequent(db, minsup, minconf, j):
            xs, ys = set(db.names(x)), set(db.names(y))
            assert any(xs <= set(r.antecedent) and ys <= set(r.consequent)
                       and r.support == sup and r.confidence >= conf for r in emitted)


def test_subset_of_closed_set_need_not_be_closed():
    """A strict subset of a closed itemset with larger support need not be
    closed, and a confident sub-rule need not come from a closed set."""
    db = TransactionDB.from_sets([{"x", "a", "b", "c"}, {"x", "a", "b"}])
    closed = {frozenset(db.names(c.items)) for c in mine_closed_itemsets(db, Fraction(1, 2))}
    assert frozenset({"x", "a", "b", "c"}) in closed
    assert frozenset({"x", "a"}) not in closed
    assert frozenset({"x", "a", "b"}) in closed
    # X => {a} has confidence 1 but X => {a, b, c} only 1/2
    x_sup = len(db.alpha(db.item_ids({"x"})))
    assert Fraction(len(db.alpha(db.item_ids({"x", "a"}))), x_sup) == 1
    assert Fraction(len(db.alpha(db.item_ids({"x", "a", "b", "c"}))), x_sup) == Fraction(1, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_monotonicity(seed):
    rng = random.Random(seed)
    db, minsup = random_db(rng)
    higher_sup = min(Fraction(1), minsup + Fraction(1, db.size))
    assert {c.items for c in mine_closed_itemsets(db, higher_sup)} <= \
        {c.items for c in mine_closed_itemsets(db, minsup)}
    closed = mine_closed_itemsets(db, minsup)
    for j in range(db.size):
        lo = {(r.antecedent, r.consequent) for r in generate_targeted_rules(db, closed, j, Fraction(1, 2))}
        hi = {(r.antecedent, r.consequent) for r in generate_targeted_rules(db, closed, j, Fraction(9, 10))}
        assert hi <= lo


def test_consistency_mark():
    db = TransactionDB.from_sets([{"a", "b"}, {"a", "b"}, {"a"}])
    closed = mine_closed_itemsets(db, Fraction(1, 3))
    assert mark_consistent(db, closed, 0)
    assert mark_consistent(db, closed, 2)
    db2 = TransactionDB.from_sets([{"a", "b"}, {"a", "c"}])
    assert not mark_consistent(db2, mine_closed_itemsets(db2, Fraction(1, 2)), 0)


def rule_with(nx: int, ny: int) -> AssociationRule:
    return AssociationRule("t", tuple(f"x{i}" for i in range(nx)), tuple(f"y{i}" for i in range(ny)),
                           Fraction(1), Fraction(1), ("a", "b"))


@pytest.mark.parametrize("nx, ny, kept", [
    (1, 4, True), (1, 5, False), (2, 9, True), (2, 10, False),
    (30, 100, True), (30, 101, False), (21, 100, True),
])
def test_post_filter_boundaries(nx, ny, kept):
    assert (filter_rules([rule_with(nx, ny)]) != []) == kept


def test_rule_order_and_json_round_trip():
    res = mine_service("UserManagerService", RESTRICTION_DB, Fraction(6, 10))
    text = rules_to_json([res])
    (back,) = rules_from_json(text, {"UserManagerService": RESTRICTION_DB})
    assert back.rules == res.rules
    doc = json.loads(text)
    assert doc[0]["rules"][0]["confidence"] == "2/3"


def test_brute_force_guard():
    db = TransactionDB.from_sets([{f"i{k}" for k in range(21)}])
    with pytest.raises(ValueError):
        brute_force_closed(db, Fraction(1))
