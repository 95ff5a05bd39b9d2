"""Run configuration: a ``key: value`` file naming inputs and thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .checkmining.marking import DEFAULT_SECURITY_EXCEPTION
from .errors import ConfigError
from .rulemine import DEFAULT_MINCONF, parse_minconf

PATH_KEYS = ("exclude_list", "cq_exprs", "cq_seeds", "cp_filter")
KNOWN_KEYS = frozenset({
    "ir_paths", *PATH_KEYS, "security_exception_type", "minconf", "minsup", "workers",
    "out_dir", "stub_bases", "dispatch_method", "entrypoint_attribute",
})


@dataclass(frozen=True)
class RunConfig:
    ir_paths: tuple[Path, ...] = ()
    exclude_list: Optional[Path] = None
    cq_exprs: Optional[Path] = None
    cq_seeds: Optional[Path] = None
    cp_filter: Optional[Path] = None
    security_exception_type: str = DEFAULT_SECURITY_EXCEPTION
    minconf: Fraction = DEFAULT_MINCONF
    minsup: str = "2/E"
    workers: int = 1
    out_dir: Path = Path("out")
    stub_bases: tuple[str, ...] = ("android.os.Binder",)
    dispatch_method: Optional[str] = "onTransact"
    entrypoint_attribute: Optional[str] = "entrypoint"
    source: Optional[Path] = field(default=None, compare=False)

    def with_overrides(self, *, minconf=None, minsup=None, workers=None, out_dir=None) -> "RunConfig":
        changes = {}
        if minconf is not None:
            changes["minconf"] = check_minconf(minconf)
        if minsup is not None:
            changes["minsup"] = check_minsup(minsup)
        if workers is not None:
            changes["workers"] = check_workers(workers)
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir)
        return replace(self, **changes)


def check_minconf(text, line: int | None = None, path: str | None = None) -> Fraction:
    try:
        return parse_minconf(str(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"minconf must be a number in (0, 1], got {text!r}", line, path) from None


def check_minsup(text, line: int | None = None, path: str | None = None) -> str:
    raw = str(text).strip()
    try:
        if raw.upper().endswith("/E"):
            count = Fraction(raw[:-2].strip())
            ok = count > 0
        else:
            value = Fraction(raw)
            ok = 0 < value <= 1
    except (ValueError, ZeroDivisionError):
        ok = False
    if not ok:
        raise ConfigError(f"minsup must be 'k/E' or a number in (0, 1], got {raw!r}", line, path)
    return raw


def check_workers(text, line: int | None = None, path: str | None = None) -> int:
    try:
        value = int(str(text).strip())
    except ValueError:
        value = 0
    if value < 1:
        raise ConfigError(f"workers must be a positive integer, got {text!r}", line, path)
    return value


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_config(text: str, base_dir: Path, path: str | None = None) -> RunConfig:
    values: dict = {}
    seen_lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        colon, equals = line.find(":"), line.find("=")
        cut = min(i for i in (colon, equals) if i >= 0) if max(colon, equals) >= 0 else -1
        if cut < 0:
            raise ConfigError(f"expected 'key: value', got {raw.strip()!r}", lineno, path)
        key, value = line[:cut].strip(), line[cut + 1:].strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in seen_lines:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen_lines[key]})", lineno, path)
        seen_lines[key] = lineno

        def resolve(p: str) -> Path:
            full = (base_dir / p).resolve() if not Path(p).is_absolute() else Path(p)
            if not full.exists():
                raise ConfigError(f"{key}: no such file {p!r}", lineno, path)
            return full

        if key == "ir_paths":
            items = _split_list(value)
            if not items:
                raise ConfigError("ir_paths is empty", lineno, path)
            values[key] = tuple(resolve(p) for p in items)
        elif key in PATH_KEYS:
            values[key] = resolve(value) if value else None
        elif key == "minconf":
            values[key] = check_minconf(value, lineno, path)
        elif key == "minsup":
            values[key] = check_minsup(value, lineno, path)
        elif key == "workers":
            values[key] = check_workers(value, lineno, path)
        elif key == "out_dir":
            values[key] = (base_dir / value).resolve() if not Path(value).is_absolute() else Path(value)
        elif key == "stub_bases":
            values[key] = _split_list(value)
        elif key in ("dispatch_method", "entrypoint_attribute"):
            values[key] = value or None
        else:
            if not value:
                raise ConfigError(f"{key} is empty", lineno, path)
            values[key] = value
    if "out_dir" not in values:
        values["out_dir"] = (base_dir / "out").resolve()
    return RunConfig(**values, source=Path(path) if path else None)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return parse_config(text, p.resolve().parent, str(p))
