"""Symmetric-matrix algebra: energy directions, the density W, edge-basis coordinates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import Simplex, freudenthal_partition

COND_LIMIT = 1e12


class IllConditionedBasisError(ValueError):
    pass


def sym(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def sym_inner(A, B) -> float:
    """Frobenius product ``A : B = tr(A^T B)``."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def sym_dim(n: int) -> int:
    return n * (n + 1) // 2


def _triu(n: int):
    return np.triu_indices(n)


def to_upper(A: np.ndarray) -> np.ndarray:
    """Row-major upper-triangle entries (i <= j) of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    i, j = _triu(A.shape[-1])
    return A[..., i, j]


def from_upper(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    if n is None:
        n = int(round((math.sqrt(8 * m + 1) - 1) / 2))
    if sym_dim(n) != m:
        raise ValueError(f"{m} entries do not form the upper triangle of a matrix")
    out = np.zeros(v.shape[:-1] + (n, n))
    i, j = _triu(n)
    out[..., i, j] = v
    out[..., j, i] = v
    return out


def is_symmetric(A, tol: float = 0.0) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and bool(np.all(np.abs(A - A.T) <= tol))


@dataclass(frozen=True, eq=False)
class EnergyDirections:
    """The finite spanning set of symmetric matrices and exponent defining W."""

    matrices: np.ndarray
    p: float

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("energy directions must be an array of square matrices")
        if not np.array_equal(mats, np.swapaxes(mats, 1, 2)):
            raise ValueError("energy directions must be symmetric")
        if not self.p >= 1:
            raise ValueError(f"growth exponent p must be >= 1, got {self.p}")
        n = mats.shape[1]
        coords = to_upper(mats).T
        if np.linalg.matrix_rank(coords) < sym_dim(n):
            raise ValueError("energy directions do not span the symmetric matrices")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "p", float(self.p))

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def __len__(self) -> int:
        return len(self.matrices)

    def projections(self, xi: np.ndarray) -> np.ndarray:
        """``xi : A`` for every A, shape ``(..., len(self))``."""
        return np.einsum("...ij,aij->...a", np.asarray(xi, dtype=float), self.matrices)

    def density(self, xi: np.ndarray) -> np.ndarray:
        return np.sum(np.abs(self.projections(xi)) ** self.p, axis=-1)

    @cached_property
    def alpha(self) -> np.ndarray:
        """Edge-basis coordinates, shape ``(n!, len(self), n(n+1)/2)``."""
        S = freudenthal_partition(self.n)
        out = np.empty((len(S), len(self), sym_dim(self.n)))
        for k, s in enumerate(S):
            out[k] = _edge_solve(s, self.matrices)
        out.setflags(write=False)
        return out

    def upper_entries(self) -> list[list[float]]:
        return to_upper(self.matrices).tolist()


def default_energy_directions(n: int, p: float) -> EnergyDirections:
    """Orthonormal canonical basis of Sym(n)."""
    mats = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        mats.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            mats.append(E)
    return EnergyDirections(np.array(mats), p)


def energy_directions_from_upper(rows, p: float) -> EnergyDirections:
    return EnergyDirections(from_upper(np.asarray(rows, dtype=float)), p)


def energy_density(xi, dirs: EnergyDirections) -> float:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (dirs.n, dirs.n):
        raise ValueError(f"strain shape {xi.shape} does not match n = {dirs.n}")
    return float(dirs.density(xi))


def _edge_solve(s: Simplex, targets: np.ndarray) -> np.ndarray:
    basis = s.edges.dyads()
    B = to_upper(basis).T  # column j holds the coordinates of nu_j (x) nu_j
    gram = np.einsum("aij,bij->ab", basis, basis)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedBasisError(f"edge basis of {s.permutation} has condition {cond:.3g}")
    rhs = to_upper(np.asarray(targets, dtype=float))
    return np.linalg.solve(B, rhs.T).T


def edge_basis_coefficients(A, S: Simplex) -> np.ndarray:
    """Coordinates of A in the basis ``{nu_j (x) nu_j}`` of normalised edge dyads of S."""
    A = np.asarray(A, dtype=float)
    if A.shape != (S.n, S.n) or not is_symmetric(A, 1e-14):
        raise ValueError("A must be a symmetric matrix matching the simplex dimension")
    return _edge_solve(S, A)
