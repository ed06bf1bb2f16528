"""Evaluation of the acceptance criteria, from sweep rows or by direct computation."""
from __future__ import annotations

import itertools
import math
import tempfile
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..approximation import ApproxReport
from ..energies import cell_bulk_terms, continuum_bulk_energy
from ..fields import CATALOG, make_field, slice_check
from ..geometry import Box
from ..interpolation import DiscreteField
from ..lattice import LatticeSpec, distinct_direction_union, freudenthal_partition, locate_simplex
from ..symalg import default_energy_directions, sym_dim, to_upper
from .sweep import per_h_stats, loglog_slope

SUM_RTOL = 1e-12


class AcceptanceInputError(ValueError):
    """Sweep data that cannot be checked; ``missing`` names the absent columns or rows."""

    def __init__(self, message: str, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


@dataclass(frozen=True)
class CriterionResult:
    id: int
    name: str
    status: str  # "pass", "fail" or "n/a"
    measured: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{self.status.upper():4}] {self.id}. {self.name}: {vals}" + (
            f" ({self.detail})" if self.detail else "")


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _result(cid, name, ok, measured, detail=""):
    return CriterionResult(cid, name, "pass" if ok else "fail", measured, detail)


def _na(cid, name, detail):
    return CriterionResult(cid, name, "n/a", {}, detail)


# --- sweep-data criteria ---------------------------------------------------

def _validate(rows: list[dict], meta: dict | None) -> None:
    if not rows:
        raise AcceptanceInputError("no sweep rows", ("rows",))
    need = set(ApproxReport.columns())
    missing = sorted(need - set(rows[0]))
    if missing:
        raise AcceptanceInputError(f"missing columns: {', '.join(missing)}", missing)
    if not meta or "h" not in meta or "samples" not in meta:
        return
    have = {(r["h"], r["sample"]) for r in rows}
    absent = []
    for text in meta["h"]:
        h = float(Fraction(text))
        for k in range(int(meta["samples"])):
            if not any(math.isclose(h, hh, rel_tol=1e-12) and k == kk for hh, kk in have):
                absent.append(f"h={text} sample={k}")
    if absent:
        raise AcceptanceInputError(f"missing {len(absent)} rows: {', '.join(absent[:8])}"
                                   + (" ..." if len(absent) > 8 else ""), absent)


def _group(stats, h):
    for s in stats:
        if s["runs"] and math.isclose(s["h"], h, rel_tol=1e-12):
            return s
    return None


def criterion_affine(rows) -> CriterionResult:
    name = "affine exactness"
    lp = max(r["lp_error"] for r in rows)
    e1 = 0.0
    for r in rows:
        target = r["continuum_bulk_u"] / r["omega_volume"] * r["covered_volume"]
        diff = abs(r["discrete_bulk"] - target)
        e1 = max(e1, diff / target if target > 0 else diff)
    e2 = max(r["discrete_surface"] for r in rows)
    sigma = max(r["sigma_dedup"] for r in rows)
    bad = max(r["bad_cells"] for r in rows)
    ok = lp <= 1e-9 and e1 <= 1e-8 and e2 == 0 and sigma == 0 and bad == 0
    return _result(3, name, ok, {"max_lp_error": lp, "max_E1_rel_error": e1, "max_E2": e2,
                                 "max_sigma": sigma, "max_bad_cells": bad})


def criterion_bulk(rows, stats) -> CriterionResult:
    name = "bulk convergence"
    coarse, fine = _group(stats, 1 / 8), _group(stats, 1 / 128)
    if coarse is None or fine is None:
        return _na(4, name, "needs h = 1/8 and h = 1/128 in the sweep")
    hs = [s["h"] for s in stats if s["runs"] and 1 / 128 * (1 - 1e-12) <= s["h"] <= 1 / 8 * (1 + 1e-12)]
    errs = [_group(stats, h)["bulk_error"] for h in hs]
    slope = loglog_slope(hs, errs)
    rel = fine["bulk_rel_error"]
    ok = slope >= 0.7 and rel <= 0.05
    return _result(4, name, ok, {"order": slope, "rel_error_h128": rel})


def criterion_surface(rows, stats) -> CriterionResult:
    name = "surface expectation"
    fine = _group(stats, 1 / 128)
    if fine is None:
        return _na(5, name, "needs h = 1/128")
    group = [r for r in rows if math.isclose(r["h"], 1 / 128, rel_tol=1e-12)]
    if len(group) < 64:
        return _result(5, name, False, {"samples": len(group)}, "needs 64 shifts at h = 1/128")
    mean = float(np.mean([r["discrete_surface"] for r in group]))
    target = group[0]["surface_target"]
    rel = abs(mean - target) / target
    return _result(5, name, rel <= 0.03, {"mean_E2": mean, "target": target, "rel_error": rel})


def criterion_chain(rows) -> CriterionResult:
    name = "inequality chain"
    bulk = sigma = surf = 0
    failed = skipped = 0
    for r in rows:
        if r["status"].startswith("failed"):
            failed += 1
            continue
        cb = r["continuum_bulk_vh"]
        if not math.isfinite(cb):
            skipped += 1
        elif cb > r["discrete_bulk"] * (1 + SUM_RTOL) + 1e-300:
            bulk += 1
        if r["sigma_dedup"] > r["sigma_bound"] * (1 + SUM_RTOL):
            sigma += 1
        if r["witnesses_ok"] and r["sigma_bound"] > r["discrete_surface"] * (1 + SUM_RTOL):
            surf += 1
    ok = bulk == sigma == surf == failed == 0
    worst = max((r["sigma_dedup"] / r["sigma_bound"] for r in rows
                 if r["sigma_bound"] > 0 and not r["status"].startswith("failed")), default=0.0)
    return _result(6, name, ok, {"rows": len(rows), "bulk_violations": bulk,
                                 "sigma_violations": sigma, "surface_violations": surf,
                                 "failed_runs": failed, "max_sigma_ratio": worst},
                   f"bulk check skipped on {skipped} rows without continuum columns" if skipped else "")


def criterion_lp(rows, stats) -> CriterionResult:
    name = "Lp convergence"
    coarse, fine = _group(stats, 1 / 16), _group(stats, 1 / 128)
    if coarse is None or fine is None:
        return _na(7, name, "needs h = 1/16 and h = 1/128")
    ratio = fine["lp_error_mean"] / coarse["lp_error_mean"]
    band = [s["bad_volume_over_h"] for s in stats if s["runs"]]
    spread = max(band) / min(band) if min(band) > 0 else float("inf")
    ok = ratio <= 1 / 3 and spread <= 3
    return _result(7, name, ok, {"lp_ratio": ratio, "bad_volume_over_h_spread": spread,
                                 "p": rows[0]["p"]})


def check_acceptance(rows, meta: dict | None = None) -> list[CriterionResult]:
    """Every criterion the sweep data can decide; the others come back ``n/a``.

    Raises AcceptanceInputError on missing columns or, when ``meta`` lists the
    expected h values and sample count, on missing rows.
    """
    rows = [r.as_dict() if isinstance(r, ApproxReport) else dict(r) for r in rows]
    _validate(rows, meta)
    stats = per_h_stats(rows)
    fields_ = {r["field"] for r in rows}
    out = []
    if fields_ <= {"affine", "rigid"}:
        out.append(criterion_affine(rows))
    else:
        out.append(_na(3, "affine exactness", "not an affine sweep"))
    if fields_ == {"quadratic"}:
        out.append(criterion_bulk(rows, stats))
    else:
        out.append(_na(4, "bulk convergence", "not a quadratic sweep"))
    if fields_ == {"planar_jump"} and {r["n"] for r in rows} == {2}:
        out.append(criterion_surface(rows, stats))
    else:
        out.append(_na(5, "surface expectation", "not a planar-jump sweep in n = 2"))
    out.append(criterion_chain(rows))
    if fields_ <= {"planar_jump", "sphere_jump"}:
        out.append(criterion_lp(rows, stats))
    else:
        out.append(_na(7, "Lp convergence", "not a jump-field sweep"))
    return out


def check_csv(path) -> list[CriterionResult]:
    from .sweep import read_csv

    meta, rows = read_csv(path)
    return check_acceptance(rows, meta)


# --- direct criteria -------------------------------------------------------

def check_structural(dims=(2, 3, 4), samples: int = 2000, seed: int = 0) -> CriterionResult:
    """Partition, volume and spanning invariants of the Freudenthal simplices."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    problems = []
    for n in dims:
        S = freudenthal_partition(n)
        if len(S) != math.factorial(n):
            problems.append(f"n={n}: {len(S)} simplices")
        vol = math.fsum(s.volume() for s in S)
        if abs(vol - 1.0) > 1e-12:
            problems.append(f"n={n}: total volume {vol}")
        x = rng.random((samples, n))
        inside = np.stack([s.contains(x, 1e-12) for s in S])
        if not np.all(inside.sum(axis=0) >= 1):
            problems.append(f"n={n}: uncovered points")
        k = locate_simplex(x)
        if not np.all(inside[k, np.arange(samples)]):
            problems.append(f"n={n}: located simplex does not contain its point")
        strict = np.stack([np.all(s.barycentric(x) > 1e-9, axis=1) for s in S])
        if np.any(strict.sum(axis=0) > 1):
            problems.append(f"n={n}: interiors overlap")
        for s in S:
            dy = to_upper(s.edges.dyads())
            if np.linalg.matrix_rank(dy) < sym_dim(n):
                problems.append(f"n={n}: edge dyads of {s.permutation} do not span")
        if len(distinct_direction_union(n)) != 2 ** n - 1:
            problems.append(f"n={n}: direction union has {len(distinct_direction_union(n))}")
    dt = time.perf_counter() - t0
    ok = not problems and dt < 1.0
    return _result(1, "structural", ok, {"runtime_s": dt, "dims": list(dims)}, "; ".join(problems))


def _single_cell(n: int, h: float, values: np.ndarray) -> DiscreteField:
    spec = LatticeSpec.create(Box((0.0,) * n, (h,) * n), h)
    lo, hi = spec.omega_cell_range()
    assert np.array_equal(lo, hi)
    return DiscreteField(spec, lo, values, np.zeros((1,) * n, dtype=np.int8))


def check_cube_identity(datasets: int = 200, dims=(2, 3), ps=(1.5, 2.0, 3.0),
                        seed: int = 0) -> CriterionResult:
    """Exact integral of W over one cube equals the discrete cell term."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in dims:
        for p in ps:
            dirs = default_energy_directions(n, p)
            for _ in range(datasets):
                h = float(rng.uniform(0.05, 1.0))
                df = _single_cell(n, h, rng.normal(size=(2,) * n + (n,)))
                exact = continuum_bulk_energy(df, df.spec.domain, dirs)
                term = float(cell_bulk_terms(df, dirs, gated=False).sum())
                worst = max(worst, abs(exact - term) / max(abs(exact), 1e-300))
    dt = time.perf_counter() - t0
    return _result(2, "per-cube identity", worst <= 1e-9 and dt < 10.0,
                   {"max_rel_error": worst, "runtime_s": dt})


def check_slicing(lines: int = 50, dims=(2, 3), seed: int = 0) -> CriterionResult:
    """slice_check on random lines for every catalog field."""
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for n in dims:
        for name in CATALOG:
            u = make_field(name, n)
            for _ in range(lines):
                xi = rng.normal(size=n)
                y = rng.random(n)
                rep = slice_check(u, xi, y)
                worst = max(worst, rep.max_derivative_error)
                if not rep.ok:
                    failures.append(f"{name} n={n}")
    return _result(8, "slicing", not failures,
                   {"lines": lines * len(CATALOG) * len(dims), "max_derivative_error": worst},
                   ", ".join(sorted(set(failures))))


def check_determinism(cfg=None, threads=(1, 2)) -> CriterionResult:
    """Deterministic sweeps with different thread counts write identical CSVs."""
    from .config import SweepConfig
    from .sweep import run_sweep

    if cfg is None:
        cfg = SweepConfig(field="sphere_jump", n=2, p=2.0, h=(1 / 8, 1 / 16), samples=3,
                          rtol=1e-4, budget=10_000)
    texts = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, t in enumerate(itertools.chain(threads, threads[:1])):
            c = cfg.with_overrides(deterministic=True, threads=t)
            res = run_sweep(c, out=Path(tmp) / f"run{i}")
            texts.append(res.csv_path.read_bytes())
    same = all(t == texts[0] for t in texts)
    return _result(9, "determinism", same, {"sweeps": len(texts), "bytes": len(texts[0])})
