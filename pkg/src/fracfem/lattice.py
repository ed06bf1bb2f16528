"""Freudenthal (Kuhn) partition of the unit cube and shifted cubic lattices.

Lattice objects are kept in integer coordinates: a cell is identified by its
integer index ``c`` and occupies ``h*y + h*c + [0, h)^n``.  Geometry is only
produced on request.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .geometry import Box

MAX_DIM = 8
"""Largest supported dimension (8! = 40320 simplices per cell)."""

_TOL = 1e-9


def _check_dim(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the enumeration cap n <= {MAX_DIM}")


@dataclass(frozen=True)
class EdgeDirectionSet:
    """Edge directions ``v_i - v_k`` (k < i) of a chain simplex.

    ``directions[j]`` runs from vertex ``base[j]`` to vertex ``tip[j]``.
    """

    directions: np.ndarray
    base: tuple[int, ...]
    tip: tuple[int, ...]
    base_points: np.ndarray

    def __len__(self) -> int:
        return len(self.directions)

    def unit(self) -> np.ndarray:
        d = self.directions.astype(float)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def dyads(self) -> np.ndarray:
        """Normalised dyads ``nu_j (x) nu_j``, shape ``(m, n, n)``."""
        nu = self.unit()
        return np.einsum("ji,jk->jik", nu, nu)


@dataclass(frozen=True, eq=False)
class Simplex:
    """Freudenthal simplex ``S_sigma = conv{v_0, ..., v_n}``.

    ``permutation`` is 0-based: ``v_i = sum_{j<i} e_{permutation[j]}``.
    """

    permutation: tuple[int, ...]
    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.vertices.setflags(write=False)

    @classmethod
    def from_permutation(cls, perm: Sequence[int]) -> "Simplex":
        perm = tuple(int(p) for p in perm)
        n = len(perm)
        if sorted(perm) != list(range(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {perm}")
        verts = np.zeros((n + 1, n), dtype=np.int64)
        for i, p in enumerate(perm):
            verts[i + 1] = verts[i]
            verts[i + 1, p] = 1
        return cls(perm, verts)

    def __eq__(self, other):
        return isinstance(other, Simplex) and self.permutation == other.permutation

    def __hash__(self):
        return hash(self.permutation)

    @property
    def n(self) -> int:
        return len(self.permutation)

    def volume(self) -> float:
        return abs(np.linalg.det((self.vertices[1:] - self.vertices[0]).astype(float))) \
            / math.factorial(self.n)

    @property
    def edges(self) -> EdgeDirectionSet:
        return _edge_set(self.permutation)

    def barycentric(self, x) -> np.ndarray:
        """Barycentric coordinates of points ``x`` (rows), shape ``(N, n+1)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = x[:, list(self.permutation)]
        lam = np.empty((len(x), self.n + 1))
        lam[:, 0] = 1.0 - s[:, 0]
        lam[:, 1:-1] = s[:, :-1] - s[:, 1:]
        lam[:, -1] = s[:, -1]
        return lam

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return np.all(self.barycentric(x) >= -tol, axis=1)


@lru_cache(maxsize=None)
def _edge_set(perm: tuple[int, ...]) -> EdgeDirectionSet:
    verts = Simplex.from_permutation(perm).vertices
    n = len(perm)
    dirs, base, tip = [], [], []
    for k in range(n + 1):
        for i in range(k + 1, n + 1):
            dirs.append(verts[i] - verts[k])
            base.append(k)
            tip.append(i)
    dirs = np.array(dirs, dtype=np.int64)
    # each direction must be realised by exactly one vertex pair
    if len({tuple(d) for d in dirs}) != len(dirs):
        raise AssertionError(f"repeated edge direction in simplex {perm}")
    base_points = verts[base]
    for arr in (dirs, base_points):
        arr.setflags(write=False)
    return EdgeDirectionSet(dirs, tuple(base), tuple(tip), base_points)


@lru_cache(maxsize=None)
def _partition(n: int) -> tuple[Simplex, ...]:
    return tuple(Simplex.from_permutation(p) for p in itertools.permutations(range(n)))


def freudenthal_partition(n: int) -> tuple[Simplex, ...]:
    """All ``n!`` chain simplices of ``[0,1]^n``, in lexicographic permutation order."""
    _check_dim(n)
    return _partition(n)


def edge_directions(simplex: Simplex) -> EdgeDirectionSet:
    return simplex.edges


def distinct_direction_union(n: int) -> np.ndarray:
    """Union of the edge directions of all simplices: every nonzero 0/1 vector."""
    _check_dim(n)
    return _direction_union(n)


@lru_cache(maxsize=None)
def _direction_union(n: int) -> np.ndarray:
    seen = {}
    for s in _partition(n):
        for d in s.edges.directions:
            seen.setdefault(tuple(int(v) for v in d), None)
    out = np.array(sorted(seen, key=lambda d: (sum(d), tuple(-v for v in d))), dtype=np.int64)
    out.setflags(write=False)
    return out


def locate_simplex(x) -> np.ndarray:
    """Index into ``freudenthal_partition(n)`` of the simplex containing each row of ``x``.

    Ties on shared faces go to the lexicographically smallest permutation.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    order = np.argsort(-x, axis=1, kind="stable")
    index = {s.permutation: k for k, s in enumerate(freudenthal_partition(n))}
    return np.array([index[tuple(int(v) for v in row)] for row in order])


@dataclass(frozen=True)
class LatticeSpec:
    """Shifted lattice ``h*y + h*Z^n`` over a box domain and its enlargement."""

    h: float
    y: tuple[float, ...]
    domain: Box
    enlarged_domain: Box

    def __post_init__(self):
        n = self.domain.n
        _check_dim(n)
        y = tuple(float(v) for v in self.y)
        object.__setattr__(self, "y", y)
        if not self.h > 0:
            raise ValueError("mesh size h must be positive")
        if len(y) != n or any(not 0.0 <= v < 1.0 for v in y):
            raise ValueError(f"shift y must lie in [0,1)^{n}, got {y}")
        if self.enlarged_domain.n != n:
            raise ValueError("enlarged domain dimension mismatch")
        need = self.domain.dilate(self.h * math.sqrt(n))
        if not self.enlarged_domain.contains_box(need) or self.enlarged_domain == need:
            raise ValueError("enlarged domain must strictly contain the h*sqrt(n) "
                             "neighbourhood of the domain")

    @classmethod
    def create(cls, domain: Box, h: float, y: Sequence[float] | None = None,
               enlargement: float | None = None) -> "LatticeSpec":
        """``enlargement`` is the dilation radius of the enlarged box in units of ``h``.

        The default is ``sqrt(n) * (1 + 2**-10)``, just past the smallest
        neighbourhood the lattice invariants allow.
        """
        n = domain.n
        y = (0.0,) * n if y is None else tuple(y)
        if enlargement is None:
            enlargement = math.sqrt(n) * (1 + 2.0 ** -10)
        return cls(float(h), y, domain, domain.dilate(enlargement * h))

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def shift(self) -> np.ndarray:
        """Lattice offset ``h*y``."""
        return self.h * np.array(self.y)

    def cell_range(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive index range of cells whose closure lies in the enlarged box."""
        lo = (self.enlarged_domain.lo_array - self.shift) / self.h
        hi = (self.enlarged_domain.hi_array - self.shift) / self.h
        return np.ceil(lo - _TOL).astype(np.int64), np.floor(hi + _TOL).astype(np.int64) - 1

    def omega_cell_range(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive index range of cells meeting the open domain."""
        lo = (self.domain.lo_array - self.shift) / self.h
        hi = (self.domain.hi_array - self.shift) / self.h
        return np.floor(lo).astype(np.int64), np.ceil(hi).astype(np.int64) - 1

    def closure_cell_range(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive index range of cells whose closure meets the closed enlarged box."""
        lo = (self.enlarged_domain.lo_array - self.shift) / self.h
        hi = (self.enlarged_domain.hi_array - self.shift) / self.h
        return np.ceil(lo - 1 - _TOL).astype(np.int64), np.floor(hi + _TOL).astype(np.int64)

    def cell_origin(self, index) -> np.ndarray:
        return self.shift + self.h * np.asarray(index, dtype=float)


def face_key(cell: Sequence[int], axis: int, side: int) -> tuple[int, ...]:
    """Canonical id of a cell face; adjacent cells produce the same key."""
    c = list(int(v) for v in cell)
    c[axis] += side
    return (axis, *c)


@dataclass(frozen=True)
class CellRecord:
    index: tuple[int, ...]
    origin: np.ndarray
    inside: bool
    simplices: tuple[np.ndarray, ...]
    edges: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    faces: tuple[tuple[int, ...], ...]


def cell_edges(n: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """Distinct simplex edges of the unit cell as (local base vertex, direction)."""
    seen = {}
    for s in freudenthal_partition(n):
        es = s.edges
        for b, d in zip(es.base_points, es.directions):
            seen.setdefault((tuple(int(v) for v in b), tuple(int(v) for v in d)), None)
    return tuple(seen)


def enumerate_cells(spec: LatticeSpec, inside_only: bool = False) -> Iterator[CellRecord]:
    """Cells whose closure meets the closed enlarged box, in lexicographic order.

    ``inside`` marks cells whose closure lies in the enlarged box; those are the
    cells the discrete energies run over.
    """
    n, h = spec.n, spec.h
    if h > spec.domain.diameter:
        warnings.warn(f"mesh size {h} exceeds the domain diameter; no cells", RuntimeWarning)
        return
    ilo, ihi = spec.cell_range()
    lo, hi = (ilo, ihi) if inside_only else spec.closure_cell_range()
    if np.any(hi < lo):
        warnings.warn("lattice has no cells inside the enlarged domain", RuntimeWarning)
        return
    simplices = freudenthal_partition(n)
    local_edges = cell_edges(n)
    for idx in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        c = np.array(idx)
        origin = spec.cell_origin(c)
        inside = bool(np.all(c >= ilo) and np.all(c <= ihi))
        yield CellRecord(
            index=tuple(idx),
            origin=origin,
            inside=inside,
            simplices=tuple(origin + h * s.vertices for s in simplices),
            edges=tuple((tuple(int(v) for v in c + np.array(b)), d) for b, d in local_edges),
            faces=tuple(face_key(idx, a, side) for a in range(n) for side in (0, 1)),
        )
