"""Good/bad cell classification and the approximating sequence ``v_h``."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .energies import (bad_volume, continuum_bulk_energy, covered_volume, discrete_bulk_energy,
                       discrete_surface_energy, lp_distance, sigma_measure, surface_constant)
from .fields import TestField
from .interpolation import BAD, GOOD, ZEROED, DiscreteField, edge_crossings, sample_vertices
from .lattice import LatticeSpec, cell_edges, distinct_direction_union
from .symalg import EnergyDirections

log = logging.getLogger(__name__)


def classify_cells(df: DiscreteField, u: TestField) -> DiscreteField:
    """Flag a cell bad when the jump set meets one of its simplex edges.

    Each bad cell records one witnessing segment ``(absolute base vertex, e)``.
    """
    cross = df.crossings if df.crossings is not None else edge_crossings(df, u)
    edges = cell_edges(df.n)
    witness = np.full(df.cell_shape, -1, dtype=np.int64)
    for idx, (b, e) in enumerate(edges):
        sl = tuple(slice(o, o + c) for o, c in zip(b, df.cell_shape))
        hit = cross[e][sl] & (witness < 0)
        witness[hit] = idx
    bad = witness >= 0
    flags = np.where(bad, BAD, GOOD).astype(np.int8)
    witnesses = {}
    for cell in np.argwhere(bad):
        b, e = edges[witness[tuple(cell)]]
        absolute = df.cell_lo + cell
        witnesses[tuple(int(v) for v in absolute)] = (
            tuple(int(v) for v in absolute + np.array(b)), e)
    log.debug("classified %d bad cells of %d", len(witnesses), df.n_cells)
    return replace(df, flags=flags, crossings=cross, witnesses=witnesses)


def build_vh(df: DiscreteField) -> DiscreteField:
    """``v_h``: the interpolant on good cells and zero on bad ones."""
    flags = np.where(df.flags != GOOD, ZEROED, GOOD).astype(np.int8)
    return replace(df, flags=flags)


@dataclass(frozen=True)
class ApproxReport:
    n: int
    p: float
    field: str
    h: float
    shift_policy: str
    sample: int
    y: tuple[float, ...]
    lp_error: float
    discrete_bulk: float
    discrete_surface: float
    continuum_bulk_vh: float
    continuum_bulk_u: float
    sigma_dedup: float
    sigma_bound: float
    bad_cells: int
    bad_volume: float
    jump_area_u: float
    covered_volume: float
    omega_volume: float
    surface_target: float
    quad_error: float
    witnesses_ok: bool
    status: str
    wall_time: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict:
        return asdict(self)


def surface_target(u: TestField, domain) -> float:
    """``c_1~ sum_e |nu . e/|e||`` integrated over the jump inside ``domain``."""
    n = u.n
    total = 0.0
    for e in distinct_direction_union(n):
        d = e / np.linalg.norm(e)
        total += u.jump.projected_measure(d, domain)
    return surface_constant(n) * total


def reference_bulk(u: TestField, dirs: EnergyDirections, domain) -> float:
    """Closed form when the field provides one, adaptive quadrature otherwise."""
    exact = u.analytic_bulk_energy(dirs, domain)
    if exact is not None:
        return float(exact)
    return float(continuum_bulk_energy(u, domain, dirs))


def _nan_report(u, dirs, spec, policy, sample, status, t0):
    nan = float("nan")
    return ApproxReport(u.n, dirs.p, u.name, spec.h, policy, sample, tuple(spec.y), nan, nan, nan,
                        nan, nan, nan, nan, 0, nan, nan, nan, nan, nan, nan, False, status,
                        time.perf_counter() - t0)


def run_approximation(u: TestField, dirs: EnergyDirections, spec: LatticeSpec,
                      shift_policy: str = "fixed", sample: int = 0,
                      continuum_bulk_u: float | None = None, continuum: bool = True,
                      exact_sum: bool = False, rtol: float = 1e-6,
                      budget: int = 200_000, lp: bool = True) -> ApproxReport:
    """Sample, classify, build ``v_h`` and evaluate every energy for one ``(h, y)``.

    Failures are returned as a report whose ``status`` starts with ``failed``.
    With ``continuum=False`` the per-run quadrature columns are NaN; with
    ``lp=False`` only the L^p distance (the one adaptive integral) is skipped.
    """
    t0 = time.perf_counter()
    if u.n != spec.n or dirs.n != spec.n:
        raise ValueError("field, energy directions and lattice dimensions differ")
    domain = spec.domain
    try:
        df = classify_cells(sample_vertices(u, spec), u)
        E1 = discrete_bulk_energy(df, u, dirs, exact_sum)
        E2 = discrete_surface_energy(df, u, exact_sum)
        vh = build_vh(df)
        dedup, bound = sigma_measure(vh)
        nbad = int(np.count_nonzero(vh.bad))
        nan = float("nan")
        if continuum:
            cb_vh = float(continuum_bulk_energy(vh, domain, dirs))
            cb_u = reference_bulk(u, dirs, domain) if continuum_bulk_u is None else continuum_bulk_u
            if lp:
                res = lp_distance(vh, u, dirs.p, domain, rtol=rtol, return_result=True,
                                  budget=budget)
                lp_err, qerr = res.value, res.error
                status = "ok" if res.converged else "ok:quadrature-tolerance-not-met"
            else:
                lp_err = qerr = nan
                status = "ok:no-lp"
        else:
            cb_vh = lp_err = qerr = nan
            cb_u = nan if continuum_bulk_u is None else continuum_bulk_u
            status = "ok:surface-only"
        report = ApproxReport(
            n=u.n, p=dirs.p, field=u.name, h=spec.h, shift_policy=shift_policy, sample=sample,
            y=tuple(float(v) for v in spec.y), lp_error=lp_err, discrete_bulk=E1,
            discrete_surface=E2, continuum_bulk_vh=cb_vh, continuum_bulk_u=cb_u,
            sigma_dedup=dedup, sigma_bound=bound, bad_cells=nbad,
            bad_volume=bad_volume(vh, domain), jump_area_u=u.jump_area(domain),
            covered_volume=covered_volume(vh), omega_volume=domain.volume,
            surface_target=surface_target(u, domain),
            quad_error=qerr, witnesses_ok=len(df.witnesses) == nbad, status=status,
            wall_time=time.perf_counter() - t0)
    except Exception as exc:  # noqa: BLE001 - a sweep keeps going past one bad run
        log.warning("run h=%g y=%s failed: %s", spec.h, spec.y, exc)
        return _nan_report(u, dirs, spec, shift_policy, sample, f"failed:{type(exc).__name__}: {exc}", t0)
    if not math.isfinite(report.discrete_bulk):
        return replace(report, status="failed:non-finite energy")
    return report
