"""Sweep configuration stored as INI text.

Sections and keys (all optional except ``field.name``)::

    [run]
    h = 1/8, 1/16, 1/32          strictly decreasing, fractions allowed
    shifts = monte_carlo         or "fixed"
    samples = 16                 shifts per h (monte_carlo)
    y = 0.3, 0.7; 0.1, 0.2       fixed shifts, one per ";"
    seed = 0
    threads = 1
    deterministic = false
    continuum = true             false skips the quadrature columns
    lp = true                    false skips only the L^p distance
    rtol = 1e-06
    budget = 200000              live-simplex cap of the adaptive quadrature

    [domain]
    n = 2
    lo = 0, 0
    hi = 1, 1
    enlargement =                dilation of the enlarged box in units of h

    [field]
    name = quadratic
    margin = 0.5
    <param> = <json value>       passed to the catalog builder

    [energy]
    p = 2
    directions =                 JSON list of upper-triangle rows

    [output]
    dir = results
    csv = sweep.csv
    plot = plot.csv
    summary = summary.json
"""
from __future__ import annotations

import configparser
import io
import json
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from ..fields import CATALOG
from ..lattice import MAX_DIM


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    field: str
    n: int = 2
    p: float = 2.0
    h: tuple[float, ...] = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
    shifts: str = "monte_carlo"
    samples: int = 16
    fixed_y: tuple[tuple[float, ...], ...] = ()
    seed: int = 0
    threads: int = 1
    deterministic: bool = False
    continuum: bool = True
    lp: bool = True
    rtol: float = 1e-6
    budget: int = 200_000
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    enlargement: float | None = None
    margin: float = 0.5
    params: dict = field(default_factory=dict)
    directions: tuple[tuple[float, ...], ...] | None = None
    out_dir: str = "results"
    csv: str = "sweep.csv"
    plot: str = "plot.csv"
    summary: str = "summary.json"

    def __post_init__(self):
        validate(self)

    @property
    def domain_lo(self) -> tuple[float, ...]:
        return self.lo if self.lo is not None else (0.0,) * self.n

    @property
    def domain_hi(self) -> tuple[float, ...]:
        return self.hi if self.hi is not None else (1.0,) * self.n

    @property
    def n_runs(self) -> int:
        per_h = len(self.fixed_y) if self.shifts == "fixed" else self.samples
        return per_h * len(self.h)

    def paths(self, out: str | Path | None = None) -> tuple[Path, Path, Path]:
        base = Path(out if out is not None else self.out_dir)
        return base / self.csv, base / self.plot, base / self.summary

    def with_overrides(self, **kw) -> "SweepConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def validate(cfg: SweepConfig) -> None:
    if cfg.field not in CATALOG:
        raise ConfigError(f"unknown field {cfg.field!r}; choose from {', '.join(CATALOG)}")
    if not 1 <= cfg.n <= MAX_DIM:
        raise ConfigError(f"n must lie in [1, {MAX_DIM}]")
    if not cfg.p >= 1:
        raise ConfigError(f"p must be >= 1, got {cfg.p}")
    if cfg.p == 1:
        warnings.warn("p = 1: the density result needs p > 1, the approximation allows p >= 1",
                      UserWarning, stacklevel=3)
    if not cfg.h:
        raise ConfigError("h list is empty")
    if any(h <= 0 for h in cfg.h):
        raise ConfigError("h values must be positive")
    if any(b >= a for a, b in zip(cfg.h, cfg.h[1:])):
        raise ConfigError("h list must be strictly decreasing")
    if cfg.shifts not in ("monte_carlo", "fixed"):
        raise ConfigError(f"shifts must be 'monte_carlo' or 'fixed', got {cfg.shifts!r}")
    if cfg.shifts == "fixed":
        if not cfg.fixed_y:
            raise ConfigError("fixed shift policy needs at least one y")
        for y in cfg.fixed_y:
            if len(y) != cfg.n or not all(0 <= v < 1 for v in y):
                raise ConfigError(f"shift {y} is not a point of [0,1)^{cfg.n}")
    if cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    if cfg.budget < 2:
        raise ConfigError("budget must be >= 2")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for name, v in (("lo", cfg.lo), ("hi", cfg.hi)):
        if v is not None and len(v) != cfg.n:
            raise ConfigError(f"domain.{name} needs {cfg.n} entries")
    if any(a >= b for a, b in zip(cfg.domain_lo, cfg.domain_hi)):
        raise ConfigError("domain must have lo < hi in every coordinate")
    if cfg.directions is not None and any(len(r) != cfg.n * (cfg.n + 1) // 2
                                          for r in cfg.directions):
        raise ConfigError("energy directions need n(n+1)/2 upper-triangle entries")


# --- parsing ---------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(Fraction(t.strip())) for t in text.split(",") if t.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read number list {text!r}") from exc


def _bool(parser, section, key, default):
    try:
        return parser.getboolean(section, key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def _num(parser, section, key, default, kind=float):
    raw = parser.get(section, key, fallback=None)
    if raw is None or not raw.strip():
        return default
    try:
        return kind(Fraction(raw.strip())) if kind is float else kind(raw.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{section}.{key}: cannot read {raw!r}") from exc


def loads(text: str) -> SweepConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {"run", "domain", "field", "energy", "output"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    if not parser.has_option("field", "name"):
        raise ConfigError("field.name is required")
    kw = {}
    kw["field"] = parser.get("field", "name").strip()
    kw["margin"] = _num(parser, "field", "margin", 0.5)
    params = {}
    if parser.has_section("field"):
        for key, raw in parser.items("field"):
            if key in ("name", "margin"):
                continue
            try:
                params[key] = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"field.{key}: not a JSON value: {raw!r}") from exc
    kw["params"] = params
    kw["n"] = _num(parser, "domain", "n", 2, int)
    for key in ("lo", "hi"):
        raw = parser.get("domain", key, fallback="")
        kw[key] = _floats(raw) if raw.strip() else None
    kw["enlargement"] = _num(parser, "domain", "enlargement", None)
    kw["p"] = _num(parser, "energy", "p", 2.0)
    raw = parser.get("energy", "directions", fallback="")
    if raw.strip():
        try:
            kw["directions"] = tuple(tuple(float(v) for v in r) for r in json.loads(raw))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ConfigError(f"energy.directions: {exc}") from exc
    raw = parser.get("run", "h", fallback="")
    if raw.strip():
        kw["h"] = _floats(raw)
    kw["shifts"] = parser.get("run", "shifts", fallback="monte_carlo").strip()
    kw["samples"] = _num(parser, "run", "samples", 16, int)
    raw = parser.get("run", "y", fallback="")
    kw["fixed_y"] = tuple(_floats(part) for part in raw.split(";") if part.strip())
    kw["seed"] = _num(parser, "run", "seed", 0, int)
    kw["threads"] = _num(parser, "run", "threads", 1, int)
    kw["deterministic"] = _bool(parser, "run", "deterministic", False)
    kw["continuum"] = _bool(parser, "run", "continuum", True)
    kw["lp"] = _bool(parser, "run", "lp", True)
    kw["rtol"] = _num(parser, "run", "rtol", 1e-6)
    kw["budget"] = _num(parser, "run", "budget", 200_000, int)
    for key, attr in (("dir", "out_dir"), ("csv", "csv"), ("plot", "plot"), ("summary", "summary")):
        raw = parser.get("output", key, fallback=None)
        if raw is not None and raw.strip():
            kw[attr] = raw.strip()
    return SweepConfig(**kw)


def load(path: str | Path) -> SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


# --- serialisation ---------------------------------------------------------

def format_number(x: float) -> str:
    """Short exact text for ``x``: a small fraction when one reproduces it, else repr."""
    f = Fraction(x).limit_denominator(1 << 20)
    if float(f) == x and f.denominator != 1:
        return f"{f.numerator}/{f.denominator}"
    return repr(float(x))


def _join(values) -> str:
    return ", ".join(format_number(v) for v in values)


def dumps(cfg: SweepConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {
        "h": _join(cfg.h),
        "shifts": cfg.shifts,
        "samples": str(cfg.samples),
        "y": "; ".join(_join(y) for y in cfg.fixed_y),
        "seed": str(cfg.seed),
        "threads": str(cfg.threads),
        "deterministic": str(cfg.deterministic).lower(),
        "continuum": str(cfg.continuum).lower(),
        "lp": str(cfg.lp).lower(),
        "rtol": repr(cfg.rtol),
        "budget": str(cfg.budget),
    }
    parser["domain"] = {
        "n": str(cfg.n),
        "lo": _join(cfg.lo) if cfg.lo is not None else "",
        "hi": _join(cfg.hi) if cfg.hi is not None else "",
        "enlargement": repr(cfg.enlargement) if cfg.enlargement is not None else "",
    }
    fsec = {"name": cfg.field, "margin": repr(cfg.margin)}
    for k in sorted(cfg.params):
        fsec[k] = json.dumps(cfg.params[k])
    parser["field"] = fsec
    parser["energy"] = {
        "p": repr(cfg.p),
        "directions": json.dumps([list(r) for r in cfg.directions]) if cfg.directions else "",
    }
    parser["output"] = {"dir": cfg.out_dir, "csv": cfg.csv, "plot": cfg.plot,
                        "summary": cfg.summary}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def save(cfg: SweepConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg))
