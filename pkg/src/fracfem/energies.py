"""Discrete bulk/surface energies, continuum integrals and the measure of Sigma_h."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fields import TestField
from .geometry import Box, HyperplanePatch, SpherePatch
from .interpolation import (ZEROED, DiscreteField, cell_simplices, edge_crossings,
                            edge_jump_mask, quotients, simplex_gradients)
from .lattice import distinct_direction_union
from .quadrature import QuadResult, box_simplices, integrate, restrict, volumes
from .symalg import EnergyDirections, sym


def surface_constant(n: int) -> float:
    """``2^n n sqrt(n)``: weight of one crossed lattice segment per unit length."""
    return 2.0 ** n * n * math.sqrt(n)


def surface_constant_multiplicity(n: int) -> float:
    """``2^(n-1) n^(5/2) (n+1) n!``: the constant counted with per-simplex multiplicity."""
    return 2.0 ** (n - 1) * n ** 2.5 * (n + 1) * math.factorial(n)


def surface_constant_dedup(n: int) -> float:
    """Analogue of the multiplicity constant over the ``2^n - 1`` distinct directions."""
    return surface_constant(n) * (2 ** n - 1)


@dataclass(frozen=True)
class EnergyBreakdown:
    discrete_bulk: float
    discrete_surface: float
    continuum_bulk: float
    sigma_area_dedup: float
    sigma_area_bound: float
    bad_cell_count: int
    bad_volume: float


def _with_crossings(df: DiscreteField, u: TestField | None) -> DiscreteField:
    if df.crossings is not None:
        return df
    if u is None:
        raise ValueError("edge crossings are needed but no field was given")
    return replace(df, crossings=edge_crossings(df, u))


def _sum(a: np.ndarray, exact: bool) -> float:
    return math.fsum(a.ravel()) if exact else float(a.sum())


def cell_bulk_terms(df: DiscreteField, dirs: EnergyDirections, gated: bool = True) -> np.ndarray:
    """Per-cell discrete bulk contribution, shape ``cell_shape``.

    With ``gated`` the quotients of edges crossing the jump set are dropped.
    """
    if dirs.n != df.n:
        raise ValueError("energy directions and lattice dimensions differ")
    alpha = dirs.alpha
    out = np.zeros(df.cell_shape)
    for k in range(len(alpha)):
        D = quotients(df, k)
        if gated:
            D = np.where(edge_jump_mask(df, k), 0.0, D)
        proj = D @ alpha[k].T
        out += np.sum(np.abs(proj) ** dirs.p, axis=-1)
    return out * df.h ** df.n / math.factorial(df.n)


def discrete_bulk_energy(df: DiscreteField, u: TestField | None, dirs: EnergyDirections,
                         exact_sum: bool = False) -> float:
    return _sum(cell_bulk_terms(_with_crossings(df, u), dirs), exact_sum)


def discrete_surface_energy(df: DiscreteField, u: TestField | None,
                            exact_sum: bool = False) -> float:
    cross = _with_crossings(df, u).crossings
    n, h = df.n, df.h
    parts = [np.count_nonzero(cross[tuple(int(v) for v in e)]) / math.sqrt(float(e @ e))
             for e in distinct_direction_union(n)]
    total = math.fsum(parts) if exact_sum else sum(parts)
    return surface_constant(n) * h ** (n - 1) * total


def sigma_measure(df: DiscreteField) -> tuple[float, float]:
    """Area of the union of bad-cell faces, and the bound ``2n h^(n-1) N_h``."""
    bad = df.bad
    N = int(np.count_nonzero(bad))
    n, h = df.n, df.h
    shared = 0
    for axis in range(n):
        a = np.take(bad, range(0, bad.shape[axis] - 1), axis=axis)
        b = np.take(bad, range(1, bad.shape[axis]), axis=axis)
        shared += int(np.count_nonzero(a & b))
    faces = 2 * n * N - shared
    return faces * h ** (n - 1), 2 * n * h ** (n - 1) * N


def bad_volume(df: DiscreteField, domain: Box) -> float:
    """Lebesgue measure of the union of bad cells inside ``domain``."""
    cells = np.argwhere(df.bad)
    if not len(cells):
        return 0.0
    lo = df.spec.shift + df.h * (df.cell_lo + cells)
    hi = lo + df.h
    ext = np.clip(np.minimum(hi, domain.hi_array) - np.maximum(lo, domain.lo_array), 0.0, None)
    return float(np.prod(ext, axis=1).sum())


def covered_volume(df: DiscreteField) -> float:
    return df.n_cells * df.h ** df.n


def _planes(u: TestField, region: Box) -> list[tuple[np.ndarray, float]]:
    out = []
    for p in u.jump.pieces:
        if isinstance(p, HyperplanePatch) and p.box.contains_box(region, 1e-12):
            out.append((p.normal, p.offset))
    return out


def _curved_cut(u: TestField, region: Box):
    """Conservative test for simplices meeting a non-planar (or partial) jump patch."""
    curved = [p for p in u.jump.pieces
              if not (isinstance(p, HyperplanePatch) and p.box.contains_box(region, 1e-12))]
    if not curved:
        return None

    def cut(S: np.ndarray) -> np.ndarray:
        c = S.mean(axis=1)
        rho = np.linalg.norm(S - c[:, None, :], axis=2).max(axis=1)
        out = np.zeros(len(S), dtype=bool)
        for p in curved:
            if isinstance(p, SpherePatch):
                d = np.linalg.norm(c - p.center, axis=1)
                out |= np.abs(d - p.radius) <= rho * (1 + 1e-9)
            else:
                sd = p.signed_distance(S.reshape(-1, S.shape[-1])).reshape(S.shape[:2])
                out |= (sd.max(axis=1) >= 0) & (sd.min(axis=1) <= 0)
        return out

    return cut


def _omega_cells(df: DiscreteField) -> np.ndarray:
    lo, hi = df.spec.omega_cell_range()
    lo = np.maximum(lo - df.cell_lo, 0)
    hi = np.minimum(hi - df.cell_lo, np.array(df.cell_shape) - 1)
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _discrete_pieces(df: DiscreteField, domain: Box, planes=()):
    """Simplices of cells meeting ``domain`` clipped to it, with affine data per simplex."""
    cells = _omega_cells(df)
    S, cflat, sidx = cell_simplices(df, cells)
    nf = math.factorial(df.n)
    grads = np.stack([simplex_gradients(df, k).reshape(-1, df.n, df.n) for k in range(nf)], axis=1)
    G = grads[cflat, sidx]
    zero = df.flags.reshape(-1)[cflat] == ZEROED
    v0 = df.values.reshape(-1, df.n)
    # value at the first vertex of each simplex (the cell origin)
    origin_idx = np.ravel_multi_index(cells.T, df.vertex_shape)
    w0 = np.repeat(v0[origin_idx], nf, axis=0)
    c = w0 - np.einsum("mij,mj->mi", G, S[:, 0])
    G = np.where(zero[:, None, None], 0.0, G)
    c = np.where(zero[:, None], 0.0, c)
    pieces = restrict(S, np.arange(len(S)), domain, list(planes))
    return pieces, G, c, zero


def continuum_bulk_energy(v, domain: Box, dirs: EnergyDirections, rtol: float = 1e-6,
                          return_result: bool = False, **quad):
    """``int_domain W(e(v)) dx`` for a DiscreteField (exact) or a TestField (adaptive)."""
    if isinstance(v, DiscreteField):
        pieces, G, c, zero = _discrete_pieces(v, domain)
        W = dirs.density(sym(G))
        vol = volumes(pieces.simplices)
        val = math.fsum(W[pieces.parent] * vol)
        res = QuadResult(val, 0.0, True, 0, len(pieces))
    elif isinstance(v, TestField):
        m = quad.pop("base_cells", 4)
        S = box_simplices(domain, m)
        pieces = restrict(S, np.zeros(len(S), dtype=np.int64), domain, _planes(v, domain))

        def f(x, parent):
            return dirs.density(v.strains(x))

        res = integrate(f, pieces, rtol=rtol, cut=_curved_cut(v, domain), **quad)
    else:
        raise TypeError(f"cannot integrate {type(v).__name__}")
    return res if return_result else res.value


def lp_distance(v: DiscreteField, u: TestField, p: float, domain: Box, rtol: float = 1e-6,
                return_result: bool = False, **quad):
    """``||v_h - u||_{L^p(domain)}``; zeroed cells contribute ``int |u|^p``."""
    pieces, G, c, zero = _discrete_pieces(v, domain, _planes(u, domain))

    def f(x, parent):
        w = c[parent] + np.einsum("mij,mj->mi", G[parent], x)
        return np.linalg.norm(w - u.values(x), axis=1) ** p

    res = integrate(f, pieces, rtol=rtol, cut=_curved_cut(u, domain), **quad)
    val = max(res.value, 0.0)
    norm = val ** (1.0 / p)
    if not return_result:
        return norm
    err = res.error * (val ** (1.0 / p - 1.0) / p if val > 0 else 0.0)
    return QuadResult(norm, err, res.converged, res.evaluations, res.simplices)


def energy_breakdown(df: DiscreteField, u: TestField, dirs: EnergyDirections,
                     domain: Box) -> EnergyBreakdown:
    dedup, bound = sigma_measure(df)
    return EnergyBreakdown(
        discrete_bulk=discrete_bulk_energy(df, u, dirs),
        discrete_surface=discrete_surface_energy(df, u),
        continuum_bulk=continuum_bulk_energy(df, domain, dirs),
        sigma_area_dedup=dedup,
        sigma_area_bound=bound,
        bad_cell_count=int(np.count_nonzero(df.bad)),
        bad_volume=bad_volume(df, domain),
    )
