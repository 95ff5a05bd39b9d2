"""Random IR programs for property tests and oracles."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

NAMES = ("run", "step", "check", "peek")


@dataclass
class GenClass:
    name: str
    superclass: str | None
    interfaces: list[str] = field(default_factory=list)
    is_interface: bool = False
    methods: dict[tuple[str, int], list[str]] = field(default_factory=dict)  # None body = abstract
    attrs: dict[tuple[str, int], str] = field(default_factory=dict)


def _depth(classes: dict[str, GenClass], name: str) -> int:
    d = 0
    while classes[name].superclass is not None:
        name = classes[name].superclass
        d += 1
    return d


def random_hierarchy(rng: random.Random, n_classes: int = 6, n_interfaces: int = 2,
                     max_depth: int = 5) -> dict[str, GenClass]:
    classes: dict[str, GenClass] = {}
    for k in range(n_interfaces):
        classes[f"p.I{k}"] = GenClass(f"p.I{k}", None, is_interface=True)
    concrete = []
    for k in range(n_classes):
        parent = None
        options = [c for c in concrete if _depth(classes, c) < max_depth - 1]
        if options and rng.random() < 0.75:
            parent = rng.choice(options)
        ifaces = sorted({f"p.I{i}" for i in range(n_interfaces) if rng.random() < 0.3})
        name = f"p.C{k}"
        classes[name] = GenClass(name, parent, ifaces)
        concrete.append(name)
    return classes


def random_program_text(rng: random.Random, n_classes: int = 6, n_interfaces: int = 2,
                        max_methods: int = 30, max_depth: int = 5) -> str:
    """Classes with methods of arity 0 or 1 whose bodies invoke each other
    through null receivers (CHA ignores receiver values)."""
    classes = random_hierarchy(rng, n_classes, n_interfaces, max_depth)
    names = list(classes)
    budget = max_methods
    for c in classes.values():
        for mname in NAMES:
            if budget == 0:
                break
            if rng.random() < 0.45:
                arity = rng.choice((0, 1))
                c.methods[(mname, arity)] = None if c.is_interface else []
                budget -= 1
    declared = [(c.name, key) for c in classes.values() for key in c.methods]
    for c in classes.values():
        for key in c.methods:
            if c.is_interface:
                continue
            body = []
            for _ in range(rng.randint(0, 3)):
                if not declared:
                    break
                owner, (mname, arity) = rng.choice(declared)
                args = "(1)" if arity else "()"
                kind = rng.choice(("virtual", "virtual", "special", "static"))
                tail = " on r" if kind != "static" else ""
                body.append(f"invoke {kind} {owner}.{mname}{args}{tail}")
            if any(" on r" in s for s in body):
                body.insert(0, "r = const null")
            c.methods[key] = body
            if rng.random() < 0.3:
                c.attrs[key] = "entrypoint"
    out = []
    for n in names:
        c = classes[n]
        head = ("interface " if c.is_interface else "class ") + c.name
        if c.superclass:
            head += f" extends {c.superclass}"
        if c.interfaces:
            head += " implements " + ", ".join(c.interfaces)
        out.append(head + " {")
        for (mname, arity), body in c.methods.items():
            params = "x: int" if arity else ""
            attr = f" {c.attrs[(mname, arity)]}" if (mname, arity) in c.attrs else ""
            sig = f"  method {mname}({params}) -> void{attr}"
            if body is None:
                out.append(sig)
            else:
                out.append(sig + " {")
                out.extend(f"    {s}" for s in body)
                out.append("    return")
                out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"
