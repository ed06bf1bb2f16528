"""Piecewise-affine interpolation on the shifted Freudenthal lattice."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import TestField
from .lattice import LatticeSpec, Simplex, distinct_direction_union, freudenthal_partition

GOOD, BAD, ZEROED = 0, 1, 2


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Vertex samples on the cells whose closure lies in the enlarged domain.

    Arrays are indexed relative to ``cell_lo``: cell ``k`` is the absolute
    lattice cell ``cell_lo + k`` and vertex ``k`` sits at
    ``h*y + h*(cell_lo + k)``.  ``crossings[e]`` flags the lattice segments
    ``[x, x + h e]`` (indexed by base vertex) that touch the jump set.
    """

    spec: LatticeSpec
    cell_lo: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    crossings: dict | None = None
    witnesses: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return self.flags.shape

    @property
    def vertex_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def n_cells(self) -> int:
        return self.flags.size

    def cell_origins(self) -> np.ndarray:
        """Lower corners of all cells, shape ``(*cell_shape, n)``."""
        return self._grid(self.cell_shape)

    def vertex_coords(self) -> np.ndarray:
        return self._grid(self.vertex_shape)

    def _grid(self, shape) -> np.ndarray:
        axes = [self.spec.shift[i] + self.h * (self.cell_lo[i] + np.arange(shape[i]))
                for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def relative(self, cell) -> np.ndarray | None:
        k = np.asarray(cell, dtype=np.int64) - self.cell_lo
        if np.any(k < 0) or np.any(k >= np.array(self.cell_shape)):
            return None
        return k

    def vertex_block(self, offset) -> np.ndarray:
        """Values at vertex ``cell + offset`` for every cell, shape ``(*cell_shape, n)``."""
        sl = tuple(slice(o, o + c) for o, c in zip(offset, self.cell_shape))
        return self.values[sl]

    @property
    def bad(self) -> np.ndarray:
        return self.flags != GOOD

    @property
    def zeroed(self) -> np.ndarray:
        return self.flags == ZEROED


def sample_vertices(u: TestField, spec: LatticeSpec) -> DiscreteField:
    """Sample ``u`` at every vertex of the cells inside the enlarged domain."""
    if u.n != spec.n:
        raise ValueError("field and lattice dimensions differ")
    lo, hi = spec.cell_range()
    olo, ohi = spec.omega_cell_range()
    if np.any(lo > olo) or np.any(hi < ohi):
        raise ValueError("enlarged domain does not hold every cell meeting the domain")
    cshape = tuple(int(v) for v in hi - lo + 1)
    df = DiscreteField(spec, lo, np.zeros(tuple(c + 1 for c in cshape) + (spec.n,)),
                       np.zeros(cshape, dtype=np.int8))
    X = df.vertex_coords().reshape(-1, spec.n)
    if not np.all(spec.enlarged_domain.contains(X, 1e-9 * spec.h)):
        raise ValueError("lattice vertex outside the enlarged domain")
    values = u.values(X).reshape(df.values.shape)
    return replace(df, values=values)


def edge_crossings(df: DiscreteField, u: TestField) -> dict:
    """Jump indicator of every lattice segment ``[x, x + h e]``, ``e`` a nonzero 0/1 vector.

    Only segments that are simplex edges of some cell are kept: for direction
    ``e`` the base vertex ranges over ``vertex_shape - e``.
    """
    out = {}
    X = df.vertex_coords()
    vshape = np.array(df.vertex_shape)
    for e in distinct_direction_union(df.n):
        shape = tuple(int(v) for v in vshape - e)
        sl = tuple(slice(0, s) for s in shape)
        a = X[sl].reshape(-1, df.n)
        if u.jump.empty:
            out[tuple(int(v) for v in e)] = np.zeros(shape, dtype=bool)
            continue
        b = a + df.h * e
        out[tuple(int(v) for v in e)] = u.jump.crosses(a, b).reshape(shape)
    return out


def simplex_gradients(df: DiscreteField, k: int) -> np.ndarray:
    """Gradient of the interpolant on simplex ``k`` of every cell, ``(*cell_shape, n, n)``.

    Along the chain ``v_i - v_{i-1} = e_{sigma(i)}``, so column ``sigma(i)``
    is a single vertex difference.
    """
    S = freudenthal_partition(df.n)[k]
    G = np.empty(df.cell_shape + (df.n, df.n))
    prev = df.vertex_block(S.vertices[0])
    for i, axis in enumerate(S.permutation):
        cur = df.vertex_block(S.vertices[i + 1])
        G[..., :, axis] = (cur - prev) / df.h
        prev = cur
    return G


def affine_gradient(df: DiscreteField, cell, S: Simplex) -> np.ndarray:
    """Gradient of the interpolant on ``h*y + h*cell + h*S`` by a direct linear solve."""
    k = df.relative(cell)
    if k is None:
        raise ValueError(f"cell {tuple(cell)} is not part of the lattice")
    V = np.array([df.values[tuple(k + v)] for v in S.vertices])
    X = df.h * (S.vertices[1:] - S.vertices[0]).astype(float)
    if abs(np.linalg.det(X)) < 1e-300:
        raise AssertionError("degenerate simplex")
    # G X_i = V_i - V_0 for every edge from the first vertex
    return np.linalg.solve(X, V[1:] - V[0]).T


def difference_quotient(df: DiscreteField, cell, S: Simplex, j: int) -> float:
    """Longitudinal quotient of the sampled field along edge ``j`` of ``S`` in ``cell``.

    Zero when the cell is not inside the enlarged domain.
    """
    k = df.relative(cell)
    if k is None:
        return 0.0
    es = S.edges
    e = es.directions[j]
    a = k + es.base_points[j]
    du = df.values[tuple(a + e)] - df.values[tuple(a)]
    return float(du @ e) / (df.h * float(e @ e))


def quotients(df: DiscreteField, k: int) -> np.ndarray:
    """All edge quotients of simplex ``k`` in every cell, shape ``(*cell_shape, m)``."""
    es = freudenthal_partition(df.n)[k].edges
    out = np.empty(df.cell_shape + (len(es),))
    for j, (b, e) in enumerate(zip(es.base_points, es.directions)):
        du = df.vertex_block(b + e) - df.vertex_block(b)
        out[..., j] = du @ e / (df.h * float(e @ e))
    return out


def edge_jump_mask(df: DiscreteField, k: int) -> np.ndarray:
    """Jump indicator of each edge of simplex ``k`` in every cell, ``(*cell_shape, m)``."""
    if df.crossings is None:
        raise ValueError("edge crossings not computed")
    es = freudenthal_partition(df.n)[k].edges
    out = np.empty(df.cell_shape + (len(es),), dtype=bool)
    for j, (b, e) in enumerate(zip(es.base_points, es.directions)):
        cross = df.crossings[tuple(int(v) for v in e)]
        sl = tuple(slice(o, o + c) for o, c in zip(b, df.cell_shape))
        out[..., j] = cross[sl]
    return out


def locate(df: DiscreteField, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Relative cell index, simplex index and barycentric weights for points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = (x - df.spec.shift) / df.h
    base = np.floor(s).astype(np.int64)
    frac = s - base
    cell = base - df.cell_lo
    # points on the upper lattice boundary belong to the last cell
    upper = np.array(df.cell_shape)
    edge = (cell == upper) & (frac < 1e-9)
    cell = np.where(edge, cell - 1, cell)
    frac = np.where(edge, 1.0, frac)
    if np.any(cell < 0) or np.any(cell >= upper):
        raise ValueError("point outside the lattice coverage")
    order = np.argsort(-frac, axis=1, kind="stable")
    perms = {s_.permutation: k for k, s_ in enumerate(freudenthal_partition(df.n))}
    simplex = np.array([perms[tuple(int(v) for v in row)] for row in order], dtype=np.int64)
    sf = np.take_along_axis(frac, order, axis=1)
    lam = np.empty((len(x), df.n + 1))
    lam[:, 0] = 1.0 - sf[:, 0]
    lam[:, 1:-1] = sf[:, :-1] - sf[:, 1:]
    lam[:, -1] = sf[:, -1]
    return cell, simplex, lam


def evaluate_interpolant(df: DiscreteField, x, zeroed: str = "raise") -> np.ndarray:
    """Barycentric interpolation of the vertex values at points ``x``.

    ``zeroed="raise"`` rejects points in zeroed cells, ``"zero"`` returns the
    zero vector there (the ``v_h`` accessor), ``"ignore"`` interpolates anyway.
    """
    cell, simplex, lam = locate(df, x)
    cflat = np.ravel_multi_index(cell.T, df.cell_shape)
    z = df.flags.reshape(-1)[cflat] == ZEROED
    if zeroed == "raise" and z.any():
        raise ValueError("point lies in a zeroed cell")
    S = freudenthal_partition(df.n)
    out = np.zeros((len(cell), df.n))
    for k in np.unique(simplex):
        m = simplex == k
        for i, v in enumerate(S[k].vertices):
            out[m] += lam[m, i, None] * df.values[tuple((cell[m] + v).T)]
    if zeroed == "zero":
        out[z] = 0.0
    return out


def evaluate_vh(df: DiscreteField, x) -> np.ndarray:
    return evaluate_interpolant(df, x, zeroed="zero")


def cell_simplices(df: DiscreteField, cells: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical simplices of the given relative cells (all by default).

    Returns ``(S, cell_flat, simplex_index)`` with ``S`` of shape ``(M, n+1, n)``.
    """
    n = df.n
    if cells is None:
        cells = np.argwhere(np.ones(df.cell_shape, dtype=bool))
    ref = np.array([s.vertices for s in freudenthal_partition(n)], dtype=float)
    origins = df.spec.shift + df.h * (df.cell_lo + cells)
    S = origins[:, None, None, :] + df.h * ref[None]
    nf = math.factorial(n)
    flat = np.ravel_multi_index(cells.T, df.cell_shape)
    return (S.reshape(-1, n + 1, n), np.repeat(flat, nf), np.tile(np.arange(nf), len(cells)))
