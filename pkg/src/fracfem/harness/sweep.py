"""Convergence sweeps over h and lattice shifts, with CSV and summary output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..approximation import ApproxReport, reference_bulk, run_approximation
from ..fields import make_field
from ..geometry import Box
from ..lattice import LatticeSpec
from ..symalg import default_energy_directions, energy_directions_from_upper
from .config import SweepConfig, format_number

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAGIC = "# fracfem-sweep"


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: tuple[ApproxReport, ...]
    summary: dict
    csv_path: Path | None = None
    plot_path: Path | None = None
    summary_path: Path | None = None


def build_problem(cfg: SweepConfig):
    domain = Box(cfg.domain_lo, cfg.domain_hi)
    u = make_field(cfg.field, cfg.n, domain, cfg.margin, **cfg.params)
    if cfg.directions is not None:
        dirs = energy_directions_from_upper(cfg.directions, cfg.p)
    else:
        dirs = default_energy_directions(cfg.n, cfg.p)
    return domain, u, dirs


def shifts_for(cfg: SweepConfig) -> list[np.ndarray]:
    """One ``(K, n)`` array of shifts per h; a child seed stream per h keeps them stable."""
    if cfg.shifts == "fixed":
        ys = np.array(cfg.fixed_y, dtype=float)
        return [ys for _ in cfg.h]
    children = np.random.SeedSequence(cfg.seed).spawn(len(cfg.h))
    return [np.random.default_rng(c).random((cfg.samples, cfg.n)) for c in children]


def run_sweep(cfg: SweepConfig, out: str | Path | None = None, write: bool = True) -> SweepResult:
    domain, u, dirs = build_problem(cfg)
    ref = reference_bulk(u, dirs, domain)
    policy = "fixed" if cfg.shifts == "fixed" else f"monte_carlo:K={cfg.samples}:seed={cfg.seed}"
    jobs = []
    for h, ys in zip(cfg.h, shifts_for(cfg)):
        for k, y in enumerate(ys):
            jobs.append((h, k, tuple(float(v) for v in y)))

    def work(job):
        h, k, y = job
        spec = LatticeSpec.create(domain, h, y, cfg.enlargement)
        r = run_approximation(u, dirs, spec, policy, k, continuum_bulk_u=ref,
                              continuum=cfg.continuum, exact_sum=cfg.deterministic,
                              rtol=cfg.rtol, budget=cfg.budget, lp=cfg.lp)
        if cfg.deterministic:
            r = replace(r, wall_time=0.0)
        log.info("h=%s sample=%d status=%s", format_number(h), k, r.status)
        return r

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = tuple(pool.map(work, jobs))
    else:
        rows = tuple(work(j) for j in jobs)

    from .acceptance import check_acceptance

    meta = sweep_metadata(cfg)
    summary = summarize(rows)
    summary["field_source"] = "analytic catalog field defined on the enlarged box (no extension step)"
    summary["acceptance"] = [c.as_dict() for c in check_acceptance(rows, meta)]
    result = SweepResult(cfg, rows, summary)
    if not write:
        return result
    csv_path, plot_path, summary_path = cfg.paths(out)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(rows_to_csv(rows, meta))
    plot_path.parent.mkdir(parents=True, exist_ok=True)
    plot_path.write_text(plot_csv(rows))
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    summary_path.write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
    return replace(result, csv_path=csv_path, plot_path=plot_path, summary_path=summary_path)


# --- CSV -------------------------------------------------------------------

def sweep_metadata(cfg: SweepConfig) -> dict:
    per_h = len(cfg.fixed_y) if cfg.shifts == "fixed" else cfg.samples
    return {"schema": SCHEMA_VERSION, "field": cfg.field, "n": cfg.n, "p": cfg.p,
            "h": [format_number(h) for h in cfg.h], "samples": per_h}


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ";".join(repr(float(x)) for x in v)
    return str(v)


def rows_to_csv(rows, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(f"{MAGIC} {json.dumps(meta, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ApproxReport.columns()
    w.writerow(cols)
    for r in rows:
        d = r.as_dict()
        w.writerow([_cell(d[c]) for c in cols])
    return buf.getvalue()


def read_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Metadata and rows (as typed dicts) of a sweep CSV."""
    text = Path(path).read_text()
    return parse_csv(text)


_INT = {"n", "sample", "bad_cells"}
_STR = {"field", "shift_policy", "status"}


def parse_csv(text: str) -> tuple[dict, list[dict]]:
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith(MAGIC):
        meta = json.loads(lines[0][len(MAGIC):])
        lines = lines[1:]
    rows = []
    for raw in csv.DictReader(lines):
        row = {}
        for k, v in raw.items():
            if k in _STR:
                row[k] = v
            elif k in _INT:
                row[k] = int(v)
            elif k == "witnesses_ok":
                row[k] = v == "1"
            elif k == "y":
                row[k] = tuple(float(x) for x in v.split(";")) if v else ()
            else:
                row[k] = float(v)
        rows.append(row)
    return meta, rows


# --- summary ---------------------------------------------------------------

def loglog_slope(h, err) -> float:
    """Least-squares slope of log(err) against log(h); NaN if fewer than two usable points."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    ok = (h > 0) & (err > 0) & np.isfinite(err)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(err[ok]), 1)[0])


def _as_dicts(rows) -> list[dict]:
    return [r.as_dict() if isinstance(r, ApproxReport) else r for r in rows]


def per_h_stats(rows) -> list[dict]:
    """Mean and min of every energy column for each h, in sweep order."""
    rows = _as_dicts(rows)
    hs = sorted({r["h"] for r in rows}, reverse=True)
    out = []
    for h in hs:
        group = [r for r in rows if r["h"] == h and not r["status"].startswith("failed")]
        if not group:
            out.append({"h": h, "runs": 0})
            continue
        ref = group[0]["continuum_bulk_u"]
        stats = {"h": h, "runs": len(group)}
        for col in ("lp_error", "discrete_bulk", "discrete_surface", "continuum_bulk_vh",
                    "sigma_dedup", "sigma_bound", "bad_volume", "bad_cells"):
            vals = np.array([r[col] for r in group], dtype=float)
            stats[f"{col}_mean"] = float(np.mean(vals))
            stats[f"{col}_min"] = float(np.min(vals))
        stats["bulk_error"] = abs(stats["discrete_bulk_mean"] - ref)
        stats["bulk_rel_error"] = stats["bulk_error"] / abs(ref) if ref else float("nan")
        stats["bad_volume_over_h"] = stats["bad_volume_mean"] / h
        stats["surface_target"] = group[0]["surface_target"]
        stats["continuum_bulk_u"] = ref
        out.append(stats)
    return out


def summarize(rows) -> dict:
    stats = per_h_stats(rows)
    hs = [s["h"] for s in stats if s["runs"]]
    good = [s for s in stats if s["runs"]]
    rows = _as_dicts(rows)
    return {
        "runs": len(rows),
        "failed": sum(r["status"].startswith("failed") for r in rows),
        "per_h": stats,
        "order_bulk_error": loglog_slope(hs, [s["bulk_error"] for s in good]),
        "order_lp_error": loglog_slope(hs, [s["lp_error_mean"] for s in good]),
        "order_bad_volume": loglog_slope(hs, [s["bad_volume_mean"] for s in good]),
    }


PLOT_COLUMNS = ("h", "log_h", "bulk_error", "bulk_rel_error", "lp_error_mean", "lp_error_min",
                "discrete_bulk_mean", "discrete_surface_mean", "sigma_dedup_mean",
                "bad_volume_mean", "bad_volume_over_h")


def plot_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for s in per_h_stats(rows):
        if not s["runs"]:
            continue
        s = dict(s, log_h=math.log(s["h"]))
        w.writerow([repr(float(s[c])) for c in PLOT_COLUMNS])
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj
