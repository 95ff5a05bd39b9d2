"""Pretty-printer producing IR text that parses back to an equal program."""

from __future__ import annotations

import json

from .model import (
    ArrayRead,
    ArrayWrite,
    Assign,
    BinOp,
    Cast,
    ClassDecl,
    Compare,
    Const,
    FieldRead,
    FieldWrite,
    Goto,
    If,
    InstanceOf,
    Invoke,
    Label,
    LengthOf,
    Local,
    MethodDecl,
    New,
    Return,
    Switch,
    Throw,
    UnOp,
)
from .program import Program


def render_const(c: Const) -> str:
    if c.kind == "int":
        return str(c.value)
    if c.kind == "bool":
        return "true" if c.value else "false"
    if c.kind == "null":
        return "null"
    return json.dumps(c.value, ensure_ascii=False)


def render_value(v) -> str:
    return v.name if isinstance(v, Local) else render_const(v)


def render_expr(e) -> str:
    if isinstance(e, Const):
        return f"const {render_const(e)}"
    if isinstance(e, Local):
        return e.name
    if isinstance(e, FieldRead):
        on = f" on {e.base}" if e.base else ""
        return f"field {e.field.dotted}{on}"
    if isinstance(e, ArrayRead):
        return f"{e.array}[{render_value(e.index)}]"
    if isinstance(e, BinOp):
        return f"{render_value(e.left)} {e.op} {render_value(e.right)}"
    if isinstance(e, UnOp):
        return f"{e.op} {render_value(e.operand)}"
    if isinstance(e, Cast):
        return f"cast {e.type} {render_value(e.operand)}"
    if isinstance(e, New):
        return f"new {e.type}"
    if isinstance(e, LengthOf):
        return f"lengthof {render_value(e.operand)}"
    if isinstance(e, InstanceOf):
        return f"instanceof {e.type} {render_value(e.operand)}"
    raise TypeError(f"not an expression: {e!r}")


def render_statement(s) -> str:
    if isinstance(s, Assign):
        return f"{s.local} = {render_expr(s.expr)}"
    if isinstance(s, FieldWrite):
        on = f" on {s.base}" if s.base else ""
        return f"field {s.field.dotted}{on} = {render_value(s.value)}"
    if isinstance(s, ArrayWrite):
        return f"{s.array}[{render_value(s.index)}] = {render_value(s.value)}"
    if isinstance(s, Invoke):
        args = ", ".join(render_value(a) for a in s.args)
        text = f"invoke {s.kind} {s.class_name}.{s.name}({args})"
        if s.receiver:
            text += f" on {s.receiver}"
        return f"{s.result} = {text}" if s.result else text
    if isinstance(s, If):
        if isinstance(s.cond, Compare):
            cond = f"{render_value(s.cond.left)} {s.cond.op} {render_value(s.cond.right)}"
        else:
            cond = f"! {render_value(s.cond.operand)}"
        return f"if {cond} goto {s.target}"
    if isinstance(s, Switch):
        cases = " ".join(f"case {render_const(c)}: {lbl}" for c, lbl in s.cases)
        inner = f"{cases} default: {s.default}" if cases else f"default: {s.default}"
        return f"switch {s.local} {{ {inner} }}"
    if isinstance(s, Goto):
        return f"goto {s.target}"
    if isinstance(s, Label):
        return f"{s.name}:"
    if isinstance(s, Throw):
        return f"throw new {s.exc_type}({s.arg or ''})"
    if isinstance(s, Return):
        return "return" if s.value is None else f"return {render_value(s.value)}"
    raise TypeError(f"not a statement: {s!r}")


def render_method(m: MethodDecl, indent: str = "  ") -> list[str]:
    params = ", ".join(f"{n}: {t}" for n, t in m.params)
    head = f"{indent}method {m.name}({params}) -> {m.return_type}"
    for attr in sorted(m.attributes):
        head += f" {attr}"
    if m.body is None:
        return [head]
    lines = [head + " {"]
    for s in m.body:
        pad = indent if isinstance(s, Label) else indent * 2
        lines.append(pad + render_statement(s))
    lines.append(indent + "}")
    return lines


def render_class(c: ClassDecl) -> str:
    head = f"{c.kind} {c.name}"
    if c.kind == "interface":
        if c.interfaces:
            head += " extends " + ", ".join(c.interfaces)
    else:
        if c.superclass:
            head += f" extends {c.superclass}"
        if c.interfaces:
            head += " implements " + ", ".join(c.interfaces)
    for attr in sorted(c.attributes):
        head += f" {attr}"
    lines = [head + " {"]
    for n, t in c.fields:
        lines.append(f"  field {n}: {t}")
    for m in c.methods:
        lines.extend(render_method(m))
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_program(program: Program) -> str:
    return "\n".join(render_class(c) for c in program.classes)
