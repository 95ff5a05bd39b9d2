"""Closed itemset mining and targeted association rules over check sets.

Items are authorization-check strings; each entry point contributes one
transaction. Closed itemsets are enumerated with LCM-style prefix-preserving
closure extension over bitmask tidsets, so no non-closed candidate is ever
materialised. Support and confidence stay exact as ``Fraction``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional, Sequence, Union

DEFAULT_MINCONF = Fraction(85, 100)
MIN_SUPPORTERS = 2
BRUTE_FORCE_LIMIT = 20
RATIO_LIMIT = 5
CONSEQUENT_CAP = 100


@dataclass(frozen=True)
class TransactionDB:
    items: tuple[str, ...]
    transactions: tuple[frozenset[int], ...]
    labels: tuple[str, ...]

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[str]], labels: Optional[Sequence[str]] = None
                  ) -> "TransactionDB":
        sets = [frozenset(s) for s in sets]
        items = tuple(sorted(set().union(*sets))) if sets else ()
        ids = {item: i for i, item in enumerate(items)}
        txs = tuple(frozenset(ids[i] for i in s) for s in sets)
        if labels is None:
            labels = tuple(f"T{i + 1}" for i in range(len(sets)))
        if len(labels) != len(sets):
            raise ValueError("one label per transaction required")
        return cls(items, txs, tuple(labels))

    @property
    def size(self) -> int:
        return len(self.transactions)

    def item_ids(self, names: Iterable[str]) -> frozenset[int]:
        index = {item: i for i, item in enumerate(self.items)}
        return frozenset(index[n] for n in names)

    def names(self, ids: Iterable[int]) -> tuple[str, ...]:
        return tuple(sorted(self.items[i] for i in ids))

    def alpha(self, itemset: Iterable[int]) -> frozenset[int]:
        s = set(itemset)
        return frozenset(t for t, tx in enumerate(self.transactions) if s <= tx)

    def beta(self, tids: Iterable[int]) -> frozenset[int]:
        tids = list(tids)
        if not tids:
            return frozenset(range(len(self.items)))
        return frozenset.intersection(*(self.transactions[t] for t in tids))


@dataclass(frozen=True, order=True)
class ClosedItemset:
    items: frozenset[int]
    support_count: int
    supporters: frozenset[int]

    def key(self) -> tuple:
        return (tuple(sorted(self.items)), self.support_count)


def parse_minsup(value: Union[str, float, Fraction, int], n_transactions: int) -> Fraction:
    """Accepts ``"2/E"`` (E = number of transactions), fractions and decimals."""
    if isinstance(value, str):
        text = value.strip()
        if text.upper().endswith("/E"):
            count = Fraction(text[:-2].strip())
            result = count / n_transactions if n_transactions else Fraction(1)
        else:
            result = Fraction(text)
    else:
        result = Fraction(value).limit_denominator(10**6) if isinstance(value, float) else Fraction(value)
    if not 0 < result <= 1 and n_transactions:
        raise ValueError(f"minsup must be in (0, 1], got {value!r}")
    return min(result, Fraction(1))


def parse_minconf(value: Union[str, float, Fraction]) -> Fraction:
    if isinstance(value, str):
        result = Fraction(value.strip())
    elif isinstance(value, float):
        result = Fraction(str(value))
    else:
        result = Fraction(value)
    if not 0 < result <= 1:
        raise ValueError(f"minconf must be in (0, 1], got {value!r}")
    return result


def min_count(minsup: Fraction, n: int) -> int:
    """Smallest support count c with c / n >= minsup (never below 1)."""
    c = -((-minsup.numerator * n) // minsup.denominator)
    return max(c, 1)


# ---------------------------------------------------------------------------
# Closed itemsets
# ---------------------------------------------------------------------------

def mine_closed_itemsets(db: TransactionDB, minsup: Fraction) -> set[ClosedItemset]:
    """All non-empty closed itemsets with support >= minsup."""
    n = db.size
    if n == 0 or not db.items:
        return set()
    need = min_count(Fraction(minsup), n)
    n_items = len(db.items)
    tx_masks = [sum(1 << i for i in tx) for tx in db.transactions]
    item_tids = [0] * n_items
    for t, tx in enumerate(db.transactions):
        for i in tx:
            item_tids[i] |= 1 << t
    full_items = (1 << n_items) - 1

    def closure(tids: int) -> int:
        acc = full_items
        t = 0
        while tids:
            if tids & 1:
                acc &= tx_masks[t]
            tids >>= 1
            t += 1
        return acc

    out: set[ClosedItemset] = set()

    def emit(items: int, tids: int) -> None:
        if items:
            ids = frozenset(i for i in range(n_items) if items >> i & 1)
            sup = frozenset(t for t in range(n) if tids >> t & 1)
            out.add(ClosedItemset(ids, len(sup), sup))

    def extend(items: int, tids: int, core: int) -> None:
        for e in range(core + 1, n_items):
            if items >> e & 1:
                continue
            new_tids = tids & item_tids[e]
            if bin(new_tids).count("1") < need:
                continue
            new_items = closure(new_tids)
            below = (1 << e) - 1
            if new_items & below != items & below:
                continue  # not prefix-preserving: reached from another branch
            emit(new_items, new_tids)
            extend(new_items, new_tids, e)

    all_tids = (1 << n) - 1
    if n >= need:
        root = closure(all_tids)
        emit(root, all_tids)
        extend(root, all_tids, -1)
    return out


def brute_force_closed(db: TransactionDB, minsup: Fraction) -> set[ClosedItemset]:
    """Reference enumeration straight from the definitions."""
    if len(db.items) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} items, got {len(db.items)}")
    n = db.size
    if n == 0:
        return set()
    minsup = Fraction(minsup)
    out = set()
    universe = range(len(db.items))
    for k in range(1, len(db.items) + 1):
        for combo in combinations(universe, k):
            c = frozenset(combo)
            supporters = db.alpha(c)
            if not supporters or Fraction(len(supporters), n) < minsup:
                continue
            if db.beta(supporters) == c:
                out.add(ClosedItemset(c, len(supporters), supporters))
    return out


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssociationRule:
    target: str
    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]
    support: Fraction
    confidence: Fraction
    supporters: tuple[str, ...]

    def sort_key(self) -> tuple:
        return (self.target, -self.confidence, self.antecedent, self.consequent)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "antecedent": list(self.antecedent),
            "consequent": list(self.consequent),
            "support": f"{self.support.numerator}/{self.support.denominator}",
            "confidence": f"{self.confidence.numerator}/{self.confidence.denominator}",
            "supporters": list(self.supporters),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssociationRule":
        return cls(d["target"], tuple(d["antecedent"]), tuple(d["consequent"]),
                   Fraction(d["support"]), Fraction(d["confidence"]), tuple(d["supporters"]))


def generate_targeted_rules(db: TransactionDB, closed: Iterable[ClosedItemset], j: int,
                            minconf: Fraction = DEFAULT_MINCONF) -> list[AssociationRule]:
    """Rules X => Y with X = A_j & I and Y = I - A_j for each closed I."""
    a_j = db.transactions[j]
    best: dict[tuple[frozenset[int], frozenset[int]], tuple[int, AssociationRule]] = {}
    n = db.size
    for c in closed:
        x = c.items & a_j
        y = c.items - a_j
        if not x or not y or c.support_count < MIN_SUPPORTERS:
            continue
        x_count = len(db.alpha(x))
        conf = Fraction(c.support_count, x_count)
        if conf < minconf:
            continue
        rule = AssociationRule(
            target=db.labels[j],
            antecedent=db.names(x),
            consequent=db.names(y),
            support=Fraction(c.support_count, n),
            confidence=conf,
            supporters=tuple(sorted(db.labels[t] for t in c.supporters)),
        )
        key = (x, y)
        if key not in best or best[key][0] < c.support_count:
            best[key] = (c.support_count, rule)
    return sorted((r for _, r in best.values()), key=AssociationRule.sort_key)


def mark_consistent(db: TransactionDB, closed: Iterable[ClosedItemset], j: int) -> bool:
    """True when A_j itself is a closed itemset shared by at least two entries."""
    a_j = db.transactions[j]
    return any(c.items == a_j and c.support_count >= MIN_SUPPORTERS for c in closed)


def filter_rules(rules: Iterable[AssociationRule]) -> list[AssociationRule]:
    kept = [r for r in rules if len(r.consequent) < RATIO_LIMIT * len(r.antecedent)]
    return [r for r in kept if len(r.consequent) <= CONSEQUENT_CAP]


# ---------------------------------------------------------------------------
# Per-service mining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ServiceResult:
    service: str
    db: TransactionDB
    rules: tuple[AssociationRule, ...]
    consistent: tuple[str, ...]


def mine_service(service: str, entries: Sequence[tuple[str, Iterable[str]]],
                 minconf: Fraction = DEFAULT_MINCONF, minsup: Union[str, Fraction] = "2/E"
                 ) -> ServiceResult:
    """Mine one service; ``entries`` are (entry label, checks) pairs."""
    entries = sorted(entries, key=lambda e: e[0])
    db = TransactionDB.from_sets([set(c) for _, c in entries], [label for label, _ in entries])
    if db.size < MIN_SUPPORTERS:
        return ServiceResult(service, db, (), ())
    closed = mine_closed_itemsets(db, parse_minsup(minsup, db.size))
    rules: list[AssociationRule] = []
    consistent = []
    for j in range(db.size):
        if mark_consistent(db, closed, j):
            consistent.append(db.labels[j])
        rules.extend(generate_targeted_rules(db, closed, j, minconf))
    rules = sorted(filter_rules(rules), key=AssociationRule.sort_key)
    return ServiceResult(service, db, tuple(rules), tuple(consistent))


def rules_to_json(results: Iterable[ServiceResult]) -> str:
    doc = []
    for res in sorted(results, key=lambda r: r.service):
        doc.append({
            "service": res.service,
            "entries": len(res.db.labels),
            "consistent": list(res.consistent),
            "rules": [r.to_dict() for r in res.rules],
        })
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def rules_from_json(text: str, transactions: Optional[dict[str, Sequence[tuple[str, Iterable[str]]]]] = None
                    ) -> list[ServiceResult]:
    """Inverse of ``rules_to_json``. The transaction database is not stored in
    the rule document, so it is rebuilt from ``transactions`` (service ->
    (label, checks) pairs) when given and left empty otherwise."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("rule document must be a JSON list")
    out = []
    for d in data:
        entries = sorted((transactions or {}).get(d["service"], ()), key=lambda e: e[0])
        db = TransactionDB.from_sets([set(c) for _, c in entries], [label for label, _ in entries])
        rules = tuple(sorted((AssociationRule.from_dict(r) for r in d["rules"]), key=AssociationRule.sort_key))
        out.append(ServiceResult(d["service"], db, rules, tuple(d.get("consistent", ()))))
    return sorted(out, key=lambda r: r.service)
