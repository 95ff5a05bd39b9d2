"""Stage orchestration: load inputs once, fan entry points out to workers,
merge results in a fixed order and write artifacts."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .callgraph import (
    CallGraph,
    EntryPointConfig,
    ExcludeList,
    build_cha_callgraph,
    detect_entry_points,
    parse_exclude_list,
)
from .checkmining.mine import CheckSet, EntryAnalysis, MiningConfig, analyze_entry, checksets_to_json
from .config import RunConfig
from .cpfilter import FilterSpec, parse_filter
from .errors import ConfigError
from .ir.model import MethodRef
from .ir.parser import load_program
from .ir.program import Program
from .matchlang import MatcherSyntaxError, identify_context_queries, parse_matchers, parse_seeds
from .report import RunSummary, emit_exploration_dump, emit_rule_reports, summarize_run
from .rulemine import ServiceResult, mine_service, rules_to_json

log = logging.getLogger(__name__)


@dataclass
class Inputs:
    program: Program
    exclude: ExcludeList
    spec: FilterSpec
    entry_points: tuple[MethodRef, ...]
    context_queries: tuple[MethodRef, ...]
    mining: MiningConfig


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", None, str(path)) from None


def load_inputs(cfg: RunConfig) -> Inputs:
    """Config-file problems raise ConfigError; IR problems raise IRError."""
    if not cfg.ir_paths:
        raise ConfigError("ir_paths is required", None, str(cfg.source) if cfg.source else None)
    exclude = ExcludeList()
    if cfg.exclude_list:
        exclude = parse_exclude_list(_read(cfg.exclude_list), str(cfg.exclude_list))
    spec = FilterSpec()
    if cfg.cp_filter:
        spec = parse_filter(_read(cfg.cp_filter), str(cfg.cp_filter))
    exprs, seeds = [], []
    for path, reader, dest in ((cfg.cq_exprs, parse_matchers, exprs), (cfg.cq_seeds, parse_seeds, seeds)):
        if path is None:
            continue
        try:
            dest.extend(reader(_read(path)))
        except MatcherSyntaxError as exc:
            raise ConfigError(exc.args[0], exc.line, str(path)) from None
    try:
        ep_config = EntryPointConfig(cfg.entrypoint_attribute, cfg.stub_bases, cfg.dispatch_method)
    except ValueError as exc:
        raise ConfigError(str(exc), None, str(cfg.source) if cfg.source else None) from None

    program = load_program(cfg.ir_paths)
    eps = tuple(detect_entry_points(program, ep_config))
    cqs = tuple(identify_context_queries(program, exprs, seeds))
    log.info("%d entry points, %d context queries", len(eps), len(cqs))
    return Inputs(program, exclude, spec, eps, cqs, MiningConfig(cfg.security_exception_type))


# ---------------------------------------------------------------------------
# Per-entry fan-out
# ---------------------------------------------------------------------------

_WORKER_INPUTS: Optional[Inputs] = None


def _init_worker(inputs: Inputs) -> None:
    global _WORKER_INPUTS
    _WORKER_INPUTS = inputs


def _graph_task(entry: MethodRef) -> CallGraph:
    i = _WORKER_INPUTS
    return build_cha_callgraph(i.program, entry, i.exclude, i.entry_points)


def _analysis_task(entry: MethodRef) -> EntryAnalysis:
    i = _WORKER_INPUTS
    return analyze_entry(i.program, entry, i.context_queries, i.spec, i.exclude,
                         i.entry_points, i.mining)


def _fan_out(inputs: Inputs, task, workers: int) -> list:
    entries = list(inputs.entry_points)
    if workers <= 1 or len(entries) <= 1:
        _init_worker(inputs)
        return [task(e) for e in entries]
    with ProcessPoolExecutor(max_workers=min(workers, len(entries)),
                             initializer=_init_worker, initargs=(inputs,)) as pool:
        # map preserves input order, so the merge is deterministic
        return list(pool.map(task, entries))


def build_callgraphs(inputs: Inputs, workers: int = 1) -> list[CallGraph]:
    return _fan_out(inputs, _graph_task, workers)


def analyze_entries(inputs: Inputs, workers: int = 1) -> list[EntryAnalysis]:
    return _fan_out(inputs, _analysis_task, workers)


def all_candidates(analyses: Iterable[EntryAnalysis]) -> list:
    seen = {}
    for a in analyses:
        for ref, cand in a.candidates.items():
            seen.setdefault(ref, cand)
    return [seen[r] for r in sorted(seen)]


def mine_rules(check_sets: Iterable[CheckSet], minconf, minsup) -> list[ServiceResult]:
    """Group check sets by service and mine each service separately."""
    groups: dict[str, list[tuple[str, tuple[str, ...]]]] = defaultdict(list)
    for cs in check_sets:
        groups[cs.service].append((cs.entry.signature, cs.checks))
    return [mine_service(svc, entries, minconf, minsup) for svc, entries in sorted(groups.items())]


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_callgraphs(graphs: Iterable[CallGraph], out_dir: Path) -> Path:
    doc = [g.to_dict() for g in sorted(graphs, key=lambda g: g.root)]
    return _write(out_dir / "callgraphs.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_checksets(check_sets: Iterable[CheckSet], out_dir: Path) -> Path:
    return _write(out_dir / "checksets.json", checksets_to_json(check_sets))


def write_rules(results: Iterable[ServiceResult], out_dir: Path) -> Path:
    return _write(out_dir / "rules.json", rules_to_json(results))


def write_summary(summary: RunSummary, out_dir: Path) -> Path:
    return _write(out_dir / "summary.json", json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class AnalyzeResult:
    analyses: list[EntryAnalysis]
    results: list[ServiceResult]
    summary: RunSummary
    written: list[Path]


def run_analyze(cfg: RunConfig, fmt: str = "json") -> AnalyzeResult:
    inputs = load_inputs(cfg)
    analyses = analyze_entries(inputs, cfg.workers)
    check_sets = [a.check_set for a in analyses]
    results = mine_rules(check_sets, cfg.minconf, cfg.minsup)
    summary = summarize_run(check_sets, results)
    out = Path(cfg.out_dir)
    written = [
        write_callgraphs([a.graph for a in analyses], out),
        emit_exploration_dump(all_candidates(analyses), out),
        write_checksets(check_sets, out),
        write_rules(results, out),
        write_summary(summary, out),
    ]
    written += emit_rule_reports(results, check_sets, out / "reports", fmt)
    return AnalyzeResult(analyses, results, summary, written)
