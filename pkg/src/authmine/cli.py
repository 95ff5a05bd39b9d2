"""Command-line entry point: ``authmine <stage> [config] [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path

from . import pipeline
from .checkmining.mine import checksets_from_json
from .config import RunConfig, load_config
from .errors import ConfigError
from .ir.model import IRError
from .report import emit_exploration_dump, emit_rule_reports
from .rulemine import rules_from_json

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ANALYSIS = 2

STAGES = ("callgraph", "explore", "mine-checks", "mine-rules", "analyze", "report")
NEEDS_CONFIG = {"callgraph", "explore", "mine-checks", "analyze"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="authmine", description="Mine authorization checks and flag inconsistencies.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "callgraph": "dump one call graph per entry point",
        "explore": "dump strings, fields and methods seen in candidate conditionals",
        "mine-checks": "compute the authorization-check set of every entry point",
        "mine-rules": "mine inconsistency rules from a check-set document",
        "analyze": "run every stage and write all artifacts",
        "report": "render rule reports from check-set and rule documents",
    }
    for name in STAGES:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("config", nargs=None if name in NEEDS_CONFIG else "?", help="run configuration file")
        sp.add_argument("--out-dir", help="override out_dir")
        sp.add_argument("--workers", help="override workers")
        if name in ("mine-rules", "analyze", "report"):
            sp.add_argument("--minconf", help="override minconf, e.g. 0.6")
            sp.add_argument("--minsup", help="override minsup, e.g. 2/E or 0.5")
        if name in ("mine-rules", "report"):
            sp.add_argument("--checksets", help="check-set JSON (default: <out_dir>/checksets.json)")
        if name == "report":
            sp.add_argument("--rules", help="rule JSON (default: <out_dir>/rules.json)")
        if name in ("analyze", "report"):
            sp.add_argument("--format", choices=("json", "html"), default="json", help="report format")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(out_dir=Path("out"))
    return cfg.with_overrides(
        minconf=getattr(args, "minconf", None),
        minsup=getattr(args, "minsup", None),
        workers=args.workers,
        out_dir=args.out_dir,
    )


def _read_doc(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", None, str(path)) from None


def _load_checksets(path: Path):
    try:
        return checksets_from_json(_read_doc(path))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed check-set document: {exc}", None, str(path)) from None


def _run(args) -> str:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    cmd = args.command
    if cmd == "callgraph":
        inputs = pipeline.load_inputs(cfg)
        path = pipeline.write_callgraphs(pipeline.build_callgraphs(inputs, cfg.workers), out)
        return f"{len(inputs.entry_points)} call graphs -> {path}"
    if cmd == "explore":
        inputs = pipeline.load_inputs(cfg)
        analyses = pipeline.analyze_entries(inputs, cfg.workers)
        path = emit_exploration_dump(pipeline.all_candidates(analyses), out)
        return f"exploration dump -> {path}"
    if cmd == "mine-checks":
        inputs = pipeline.load_inputs(cfg)
        check_sets = [a.check_set for a in pipeline.analyze_entries(inputs, cfg.workers)]
        path = pipeline.write_checksets(check_sets, out)
        return f"{len(check_sets)} check sets -> {path}"
    if cmd == "mine-rules":
        check_sets = _load_checksets(Path(args.checksets) if args.checksets else out / "checksets.json")
        results = pipeline.mine_rules(check_sets, cfg.minconf, cfg.minsup)
        path = pipeline.write_rules(results, out)
        return f"{sum(len(r.rules) for r in results)} rules -> {path}"
    if cmd == "report":
        check_sets = _load_checksets(Path(args.checksets) if args.checksets else out / "checksets.json")
        rules_path = Path(args.rules) if args.rules else out / "rules.json"
        groups = defaultdict(list)
        for cs in check_sets:
            groups[cs.service].append((cs.entry.signature, cs.checks))
        try:
            results = rules_from_json(_read_doc(rules_path), groups)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed rule document: {exc}", None, str(rules_path)) from None
        written = emit_rule_reports(results, check_sets, out / "reports", args.format)
        return f"{len(written) - 1} reports -> {out / 'reports'}"
    res = pipeline.run_analyze(cfg, args.format)
    s = res.summary
    return (f"{s.entry_points} entry points, {s.with_checks} with checks, {s.with_rules} with rules; "
            f"{sum(len(r.rules) for r in res.results)} rules -> {out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        message = _run(args)
    except ConfigError as exc:
        print(f"authmine: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IRError as exc:
        print(f"authmine: IR error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"authmine: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
