"""Authorization-check mining for individual entry points."""

from __future__ import annotations

from .marking import (
    cq_call_sites,
    find_security_throws,
    forward_defuse_cq_returns,
    forward_uses,
    mark_backward_cps,
    mark_cq_internal_cps,
)
from .mine import (
    CheckSet,
    EntryAnalysis,
    MiningConfig,
    analyze_entry,
    checksets_from_json,
    checksets_to_json,
    mine_entrypoint_checks,
)
from .values import ALL, NULL, Val, ValueResolver, conditional_checks, invocation_checks

__all__ = [
    "ALL",
    "NULL",
    "CheckSet",
    "EntryAnalysis",
    "MiningConfig",
    "Val",
    "ValueResolver",
    "analyze_entry",
    "checksets_from_json",
    "checksets_to_json",
    "conditional_checks",
    "cq_call_sites",
    "find_security_throws",
    "forward_defuse_cq_returns",
    "forward_uses",
    "invocation_checks",
    "mark_backward_cps",
    "mark_cq_internal_cps",
    "mine_entrypoint_checks",
]
