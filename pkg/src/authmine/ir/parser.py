"""Tokenizer and recursive-descent parser for the textual IR."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .model import (
    ARITHMETIC_OPS,
    COMPARISON_OPS,
    INVOKE_KINDS,
    ArrayRead,
    ArrayWrite,
    Assign,
    BinOp,
    Cast,
    ClassDecl,
    Compare,
    Const,
    FieldAccess,
    FieldRead,
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
    Negate,
    New,
    Return,
    Switch,
    Throw,
    UnOp,
    canonical_type,
)
from .program import Program

RESERVED = frozenset({
    "const", "field", "invoke", "cast", "new", "lengthof", "instanceof", "if", "goto",
    "switch", "case", "default", "throw", "return", "on", "true", "false", "null",
    "method", "class", "interface", "extends", "implements",
})

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<arrow>->)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*)
  | (?P<op>>>>|<<|>>|==|!=|<=|>=|[+\-*/%&|^<>!])
  | (?P<punct>[(){}\[\],:=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, path: str | None = None) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise IRError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, path)
        kind = m.lastgroup
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, path: str | None):
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> IRError:
        tok = tok or self.tok
        return IRError(msg, tok.line, tok.col, self.path)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "string"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text if self.tok.kind != "newline" else "end of line"
            raise self.error(f"expected {text!r}, found {shown or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def name(self, what: str = "name") -> Token:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}")
        tok = self.tok
        self.i += 1
        return tok

    def skip_newlines(self) -> None:
        while self.tok.kind == "newline":
            self.i += 1

    def end_of_line(self) -> None:
        if self.tok.kind == "newline":
            self.i += 1
        elif not self.at("}") and self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- declarations --------------------------------------------------------

    def program(self) -> list[ClassDecl]:
        classes = []
        self.skip_newlines()
        while self.tok.kind != "eof":
            classes.append(self.class_decl())
            self.skip_newlines()
        return classes

    def type_name(self) -> str:
        base = self.name("type").text
        dims = ""
        while self.at("[") and self.peek().text == "]":
            self.i += 2
            dims += "[]"
        return canonical_type(base + dims)

    def class_decl(self) -> ClassDecl:
        start = self.tok
        if self.accept("class"):
            kind = "class"
        elif self.accept("interface"):
            kind = "interface"
        else:
            raise self.error("expected 'class' or 'interface'")
        name = canonical_type(self.name("class name").text)
        superclass: Optional[str] = None
        interfaces: list[str] = []
        if self.accept("extends"):
            if kind == "class":
                superclass = self.type_name()
            else:
                interfaces = self.type_list()
        if kind == "class" and self.accept("implements"):
            interfaces = self.type_list()
        attrs = set()
        while self.tok.kind == "name":
            attrs.add(self.name().text)
        self.skip_newlines()
        self.expect("{")
        fields: list[tuple[str, str]] = []
        methods: list[MethodDecl] = []
        self.skip_newlines()
        while not self.at("}"):
            if self.accept("field"):
                fname = self.name("field name").text
                self.expect(":")
                fields.append((fname, self.type_name()))
                self.end_of_line()
            elif self.at("method"):
                methods.append(self.method_decl(name))
            else:
                raise self.error("expected 'field', 'method' or '}'")
            self.skip_newlines()
        self.expect("}")
        self.end_of_line()
        return ClassDecl(name, kind, superclass, tuple(interfaces), tuple(fields),
                         tuple(methods), frozenset(attrs), start.line)

    def type_list(self) -> list[str]:
        out = [self.type_name()]
        while self.accept(","):
            out.append(self.type_name())
        return out

    def method_decl(self, owner: str) -> MethodDecl:
        start = self.expect("method")
        name = self.name("method name").text
        self.expect("(")
        params: list[tuple[str, str]] = []
        if not self.at(")"):
            while True:
                pname = self.local_name()
                self.expect(":")
                params.append((pname, self.type_name()))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("->")
        ret = self.type_name()
        attrs = set()
        while self.tok.kind == "name":
            attrs.add(self.name().text)
        body = None
        if self.accept("{"):
            body = self.body()
            self.expect("}")
        self.end_of_line()
        return MethodDecl(owner, name, tuple(params), ret, body, frozenset(attrs), start.line)

    # -- statements ----------------------------------------------------------

    def local_name(self) -> str:
        tok = self.name("local")
        if "." in tok.text or tok.text in RESERVED:
            raise self.error(f"invalid local name {tok.text!r}", tok)
        return tok.text

    def body(self) -> tuple:
        stmts = []
        self.skip_newlines()
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated method body")
            stmts.append(self.statement())
            self.end_of_line()
            self.skip_newlines()
        return tuple(stmts)

    def statement(self):
        tok = self.tok
        line = tok.line
        if tok.kind != "name":
            raise self.error(f"unexpected {tok.text!r} at start of statement")
        word = tok.text
        if word == "if":
            self.i += 1
            if self.accept("!"):
                cond = Negate(self.value())
            else:
                left = self.value()
                op = self.tok
                if op.text not in COMPARISON_OPS:
                    raise self.error("expected comparison operator")
                self.i += 1
                cond = Compare(op.text, left, self.value())
            self.expect("goto")
            return If(cond, self.label_name(), line)
        if word == "goto":
            self.i += 1
            return Goto(self.label_name(), line)
        if word == "return":
            self.i += 1
            if self.tok.kind == "newline" or self.at("}"):
                return Return(None, line)
            return Return(self.value(), line)
        if word == "throw":
            self.i += 1
            self.expect("new")
            exc = self.type_name()
            self.expect("(")
            arg = None if self.at(")") else self.local_name()
            self.expect(")")
            return Throw(exc, arg, line)
        if word == "switch":
            return self.switch(line)
        if word == "invoke":
            return self.invoke(None, line)
        if word == "field":
            self.i += 1
            access, base = self.field_access()
            self.expect("=")
            return FieldWrite(access, base, self.value(), line)
        if self.peek().text == ":" and word not in RESERVED and "." not in word:
            self.i += 2
            return Label(word, line)
        target = self.local_name()
        if self.accept("["):
            index = self.value()
            self.expect("]")
            self.expect("=")
            return ArrayWrite(target, index, self.value(), line)
        self.expect("=")
        if self.at("invoke"):
            return self.invoke(target, line)
        return Assign(target, self.expr(), line)

    def label_name(self) -> str:
        tok = self.name("label")
        if "." in tok.text or tok.text in RESERVED:
            raise self.error(f"invalid label {tok.text!r}", tok)
        return tok.text

    def switch(self, line: int):
        self.expect("switch")
        local = self.local_name()
        self.skip_newlines()
        self.expect("{")
        cases = []
        default = None
        self.skip_newlines()
        while not self.at("}"):
            if self.accept("case"):
                const = self.literal()
                if const is None:
                    raise self.error("expected case constant")
                self.expect(":")
                cases.append((const, self.label_name()))
            elif self.accept("default"):
                if default is not None:
                    raise self.error("duplicate default")
                self.expect(":")
                default = self.label_name()
            else:
                raise self.error("expected 'case', 'default' or '}'")
            self.skip_newlines()
        if default is None:
            raise self.error("switch without default")
        self.expect("}")
        return Switch(local, tuple(cases), default, line)

    def invoke(self, result: Optional[str], line: int) -> Invoke:
        self.expect("invoke")
        kind = self.name("invoke kind").text
        if kind not in INVOKE_KINDS:
            raise self.error(f"unknown invoke kind {kind!r}")
        qualified = self.name("method reference")
        cls, _, name = qualified.text.rpartition(".")
        if not cls:
            raise self.error("method reference must be Class.method", qualified)
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.value())
                if not self.accept(","):
                    break
        self.expect(")")
        receiver = self.local_name() if self.accept("on") else None
        if kind == "static" and receiver is not None:
            raise self.error("static invoke cannot have a receiver")
        if kind != "static" and receiver is None:
            raise self.error(f"{kind} invoke needs a receiver ('on <local>')")
        return Invoke(result, kind, canonical_type(cls), name, tuple(args), receiver, line)

    def field_access(self) -> tuple[FieldAccess, Optional[str]]:
        qualified = self.name("field reference")
        cls, _, name = qualified.text.rpartition(".")
        if not cls:
            raise self.error("field reference must be Class.field", qualified)
        base = self.local_name() if self.accept("on") else None
        return FieldAccess(canonical_type(cls), name), base

    def literal(self) -> Optional[Const]:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Const("int", int(tok.text))
        if tok.kind == "string":
            self.i += 1
            try:
                return Const("string", json.loads(tok.text))
            except json.JSONDecodeError:
                raise self.error("malformed string literal", tok) from None
        if tok.kind == "name" and tok.text in ("true", "false"):
            self.i += 1
            return Const("bool", tok.text == "true")
        if tok.kind == "name" and tok.text == "null":
            self.i += 1
            return Const("null", None)
        return None

    def value(self):
        lit = self.literal()
        if lit is not None:
            return lit
        return Local(self.local_name())

    def expr(self):
        word = self.tok.text if self.tok.kind == "name" else None
        if word == "const":
            self.i += 1
            lit = self.literal()
            if lit is None:
                raise self.error("expected literal")
            return lit
        if word == "field":
            self.i += 1
            access, base = self.field_access()
            return FieldRead(access, base)
        if word == "cast":
            self.i += 1
            t = self.type_name()
            return Cast(t, self.value())
        if word == "new":
            self.i += 1
            return New(self.type_name())
        if word == "lengthof":
            self.i += 1
            return LengthOf(self.value())
        if word == "instanceof":
            self.i += 1
            t = self.type_name()
            return InstanceOf(t, self.value())
        if self.tok.text in ("!", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            return UnOp(op, self.value())
        if self.tok.kind == "name" and self.peek().text == "[":
            array = self.local_name()
            self.expect("[")
            index = self.value()
            self.expect("]")
            return ArrayRead(array, index)
        left = self.value()
        if self.tok.kind == "op" and self.tok.text in (ARITHMETIC_OPS | COMPARISON_OPS):
            op = self.tok.text
            self.i += 1
            return BinOp(op, left, self.value())
        if self.tok.kind == "int" and self.tok.text.startswith("-"):
            # `a -1` lexes as a negative literal; read it as subtraction
            right = Const("int", -int(self.tok.text))
            self.i += 1
            return BinOp("-", left, right)
        return left


def parse_classes(text: str, path: str | None = None) -> list[ClassDecl]:
    return _Parser(text, path).program()


def parse_program(text: str, path: str | None = None) -> Program:
    """Parse IR source into a validated, fully resolved program."""
    return Program(parse_classes(text, path), path=path)


def load_program(paths: Iterable[str | Path]) -> Program:
    """Parse several IR files as one program (types may cross files)."""
    classes: list[ClassDecl] = []
    names: list[str] = []
    for p in paths:
        p = Path(p)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise IRError(f"cannot read IR file: {exc.strerror}", path=str(p)) from None
        classes.extend(parse_classes(text, str(p)))
        names.append(str(p))
    return Program(classes, path=names[0] if len(names) == 1 else None)
