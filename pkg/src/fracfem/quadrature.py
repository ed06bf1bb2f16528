"""Adaptive quadrature over batches of simplices.

Simplices are arrays of shape ``(M, n+1, n)``.  Planar cuts (box faces,
flat jump patches) are resolved exactly by convex clipping; anything else is
handled by longest-edge bisection driven by a two-level error estimate of
the Grundmann-Moeller rule.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .geometry import Box

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def grundmann_moeller(n: int, s: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(Q, n+1)`` and weights summing to 1, degree ``2s+1``."""
    d = 2 * s + 1
    pts, wts = [], []
    for i in range(s + 1):
        w = (-1) ** i * 2.0 ** (-2 * s) * (d + n - 2 * i) ** d \
            / (math.factorial(i) * math.factorial(d + n - i))
        k = s - i
        for combo in itertools.combinations_with_replacement(range(n + 1), k):
            beta = np.bincount(np.array(combo, dtype=int), minlength=n + 1)
            pts.append((2 * beta + 1) / (d + n - 2 * i))
            wts.append(w)
    wts = np.array(wts) * math.factorial(n)
    return np.array(pts), wts


def volumes(S: np.ndarray) -> np.ndarray:
    n = S.shape[-1]
    return np.abs(np.linalg.det(S[:, 1:] - S[:, :1])) / math.factorial(n)


def apply_rule(f: Integrand, S: np.ndarray, piece: np.ndarray, s: int = 2,
               spread: bool = False):
    """Rule estimate per simplex; with ``spread`` also ``volume * (max - min)`` of node values."""
    n = S.shape[-1]
    bary, w = grundmann_moeller(n, s)
    q = len(w)
    x = np.einsum("qk,mkd->mqd", bary, S).reshape(-1, n)
    vals = f(x, np.repeat(piece, q)).reshape(len(S), q)
    vol = volumes(S)
    if spread:
        return vol * (vals @ w), vol * (vals.max(axis=1) - vals.min(axis=1))
    return vol * (vals @ w)


def bisect(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split each simplex at the midpoint of its longest edge."""
    m, k, _ = S.shape
    pairs = np.array(list(itertools.combinations(range(k), 2)))
    lengths = np.linalg.norm(S[:, pairs[:, 0]] - S[:, pairs[:, 1]], axis=2)
    best = pairs[np.argmax(lengths, axis=1)]
    rows = np.arange(m)
    mid = 0.5 * (S[rows, best[:, 0]] + S[rows, best[:, 1]])
    a, b = S.copy(), S.copy()
    a[rows, best[:, 0]] = mid
    b[rows, best[:, 1]] = mid
    return a, b


def clip_halfspace(points: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    """Vertex set of ``conv(points) ∩ {a.x <= c}``.

    Intersections are taken over all inside/outside point pairs, which is a
    superset of the edge intersections and so spans the same hull.
    """
    s = points @ a - c
    inside = s <= 1e-14
    if inside.all():
        return points
    if not inside.any():
        return points[:0]
    pin, pout = points[inside], points[~inside]
    sin, sout = s[inside], s[~inside]
    t = sin[:, None] / (sin[:, None] - sout[None, :])
    cut = pin[:, None, :] + t[..., None] * (pout[None, :, :] - pin[:, None, :])
    return np.vstack([pin, cut.reshape(-1, points.shape[1])])


def triangulate(points: np.ndarray, min_volume: float = 0.0) -> np.ndarray:
    """Simplices of the convex hull of ``points``; empty when degenerate."""
    n = points.shape[1]
    if len(points) < n + 1:
        return np.empty((0, n + 1, n))
    if n == 1:
        return np.array([[[points.min()], [points.max()]]])
    try:
        tri = Delaunay(points)
    except (QhullError, ValueError):
        return np.empty((0, n + 1, n))
    S = points[tri.simplices]
    return S[volumes(S) > min_volume]


def clip_to_box(S: np.ndarray, box: Box) -> np.ndarray:
    """``S ∩ box`` for one simplex, triangulated."""
    n = S.shape[1]
    pts = S
    for i in range(n):
        e = np.eye(n)[i]
        pts = clip_halfspace(pts, e, box.hi[i])
        if len(pts):
            pts = clip_halfspace(pts, -e, -box.lo[i])
        if not len(pts):
            return np.empty((0, n + 1, n))
    vol = volumes(S[None])[0]
    return triangulate(_unique_rows(pts), 1e-13 * vol)


def split_by_plane(S: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Both sides of one simplex cut by ``normal . x = offset``, triangulated."""
    vol = volumes(S[None])[0]
    parts = []
    for sign in (1.0, -1.0):
        pts = clip_halfspace(S, sign * normal, sign * offset)
        if len(pts):
            parts.append(triangulate(_unique_rows(pts), 1e-13 * vol))
    return np.concatenate(parts) if parts else np.empty((0,) + S.shape)


def _unique_rows(pts: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(pts).max()))
    key = np.round(pts / scale, 13)
    _, idx = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(idx)]


@dataclass(frozen=True)
class Pieces:
    """Simplices with a parent index into the integrand's per-piece data."""

    simplices: np.ndarray
    parent: np.ndarray

    def __len__(self) -> int:
        return len(self.parent)


def restrict(simplices: np.ndarray, parent: np.ndarray, box: Box,
             planes: list[tuple[np.ndarray, float]] = ()) -> Pieces:
    """Clip simplices to ``box`` and split them along the given hyperplanes."""
    S, par = simplices, parent
    lo, hi = S.min(axis=1), S.max(axis=1)
    tol = 1e-13
    outside = np.any((hi <= box.lo_array + tol) | (lo >= box.hi_array - tol), axis=1)
    S, par, lo, hi = S[~outside], par[~outside], lo[~outside], hi[~outside]
    inner = np.all((lo >= box.lo_array - tol) & (hi <= box.hi_array + tol), axis=1)
    out_S, out_p = [S[inner]], [par[inner]]
    for k in np.flatnonzero(~inner):
        sub = clip_to_box(S[k], box)
        out_S.append(sub)
        out_p.append(np.full(len(sub), par[k]))
    S = np.concatenate(out_S)
    par = np.concatenate(out_p)
    for normal, offset in planes:
        sd = S @ normal - offset
        scale = np.abs(S).max(axis=(1, 2)) + 1.0
        cut = (sd.max(axis=1) > 1e-13 * scale) & (sd.min(axis=1) < -1e-13 * scale)
        if not cut.any():
            continue
        out_S, out_p = [S[~cut]], [par[~cut]]
        for k in np.flatnonzero(cut):
            sub = split_by_plane(S[k], normal, offset)
            out_S.append(sub)
            out_p.append(np.full(len(sub), par[k]))
        S = np.concatenate(out_S)
        par = np.concatenate(out_p)
    return Pieces(S, par)


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    evaluations: int
    simplices: int


def integrate(f: Integrand, pieces: Pieces, rtol: float = 1e-6, atol: float = 1e-15,
              max_depth: int = 20, cut: Callable[[np.ndarray], np.ndarray] | None = None,
              budget: int = 200_000, s: int = 2) -> QuadResult:
    """Adaptive integral of ``f(x, parent)`` over the union of ``pieces``.

    A simplex is accepted once its Grundmann-Moeller estimate agrees with the
    estimate over its two bisection children to within a volume-proportional
    share of ``max(rtol * |I|, atol)``.  Simplices flagged by ``cut`` (curved
    discontinuities) keep being bisected until ``max_depth``.  At most
    ``budget`` live simplices are kept; past that the largest errors are
    refined and the rest accepted.
    """
    S, par = pieces.simplices, pieces.parent
    if len(S) == 0:
        return QuadResult(0.0, 0.0, True, 0, 0)
    vol = volumes(S)
    total_vol = vol.sum()
    q = len(grundmann_moeller(S.shape[-1], s)[1])
    Q = apply_rule(f, S, par, s)
    evals = q * len(S)
    estimate = Q.sum()
    done_val, done_err = [], []
    converged = True
    depth = 0
    ncut = np.zeros(len(S), dtype=bool) if cut is None else cut(S)
    while len(S):
        A, B = bisect(S)
        (QA, RA), (QB, RB) = (apply_rule(f, A, par, s, spread=True),
                              apply_rule(f, B, par, s, spread=True))
        evals += 2 * q * len(S)
        Qc = QA + QB
        err = np.abs(Qc - Q)
        if cut is not None:
            # across a curved jump the two levels can agree by accident; bound by the node spread
            err = np.where(ncut, np.maximum(err, RA + RB), err)
        estimate = math.fsum(done_val) + Qc.sum()
        tol = max(rtol * abs(estimate), atol)
        local = tol * volumes(S) / total_vol
        accept = err <= local
        if cut is not None:
            accept &= ~ncut
        if depth >= max_depth:
            if not accept.all():
                converged = False
            accept[:] = True
        refine = np.flatnonzero(~accept)
        if 2 * len(refine) > budget:
            converged = False
            order = refine[np.argsort(-err[refine], kind="stable")]
            keep = np.sort(order[: budget // 2])
            accept[:] = True
            accept[keep] = False
            refine = keep
        done_val.append(float(Qc[accept].sum()))
        done_err.append(float(err[accept].sum()))
        if not len(refine):
            break
        S = np.concatenate([A[refine], B[refine]])
        Q = np.concatenate([QA[refine], QB[refine]])
        par = np.concatenate([par[refine], par[refine]])
        ncut = np.zeros(len(S), dtype=bool) if cut is None else cut(S)
        depth += 1
    value = math.fsum(done_val)
    error = math.fsum(done_err)
    converged = converged and error <= max(rtol * abs(value), atol) * 1.000001 + 1e-300
    return QuadResult(value, error, converged, evals, len(pieces))


def box_simplices(box: Box, m: int = 1) -> np.ndarray:
    """Freudenthal triangulation of ``box`` split into ``m^n`` sub-boxes."""
    from .lattice import freudenthal_partition

    n = box.n
    ref = np.array([s.vertices for s in freudenthal_partition(n)], dtype=float)
    L = (box.hi_array - box.lo_array) / m
    out = []
    for idx in itertools.product(range(m), repeat=n):
        origin = box.lo_array + L * np.array(idx)
        out.append(origin + ref * L)
    return np.concatenate(out)
