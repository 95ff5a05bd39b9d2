"""Textual three-address IR: model, parser, renderer and control-flow graphs."""

from __future__ import annotations

from .cfg import ControlFlowGraph, back_edges, build_cfg, dominators
from .model import *  # noqa: F401,F403
from .model import IRError, MethodRef, FieldRef, StmtRef
from .parser import load_program, parse_classes, parse_program, tokenize
from .program import Program, subtypes_of
from .render import render_class, render_program, render_statement

__all__ = [
    "ControlFlowGraph",
    "FieldRef",
    "IRError",
    "MethodRef",
    "Program",
    "StmtRef",
    "back_edges",
    "build_cfg",
    "dominators",
    "load_program",
    "parse_classes",
    "parse_program",
    "render_class",
    "render_program",
    "render_statement",
    "subtypes_of",
    "tokenize",
]
