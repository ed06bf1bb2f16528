"""Axis-aligned boxes and analytic jump-surface patches.

Patches answer three questions exactly: where a line meets them, whether a
closed segment touches them, and how much (weighted) area they carry inside a
box.  Everything is vectorised over rows of ``(N, n)`` arrays.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special
from scipy.spatial import ConvexHull

_EPS = 1e-12


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo, hi]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box corners must have equal, nonzero length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n: int) -> "Box":
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        return math.dist(self.lo, self.hi)

    def dilate(self, r: float) -> "Box":
        return Box(tuple(a - r for a in self.lo), tuple(b + r for b in self.hi))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo_array - tol) & (x <= self.hi_array + tol), axis=-1)

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return all(a - tol <= c and d <= b + tol
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def line_interval(self, a: np.ndarray, d: np.ndarray) -> tuple[float, float] | None:
        """Parameter range ``t`` with ``a + t d`` inside the box, or None."""
        t0, t1 = -math.inf, math.inf
        for ai, di, lo, hi in zip(a, d, self.lo, self.hi):
            if abs(di) < _EPS:
                if ai < lo or ai > hi:
                    return None
                continue
            s0, s1 = (lo - ai) / di, (hi - ai) / di
            if s0 > s1:
                s0, s1 = s1, s0
            t0, t1 = max(t0, s0), min(t1, s1)
        if t0 > t1:
            return None
        return t0, t1


def _as_rows(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


class HyperplanePatch:
    """The piece of the hyperplane ``(x - point) . normal = 0`` inside ``box``."""

    kind = "hyperplane"

    def __init__(self, point: Sequence[float], normal: Sequence[float], box: Box):
        normal = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(normal)
        if norm == 0:
            raise ValueError("hyperplane normal must be nonzero")
        self.point = np.asarray(point, dtype=float)
        self.normal = normal / norm
        self.box = box
        if self.point.shape != self.normal.shape or self.box.n != self.normal.size:
            raise ValueError("dimension mismatch in hyperplane patch")
        self.offset = float(self.point @ self.normal)

    @property
    def n(self) -> int:
        return self.normal.size

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.normal - self.offset

    def crosses(self, a, b) -> np.ndarray:
        """Closed segments ``[a_k, b_k]`` that touch the patch."""
        a, b = _as_rows(a), _as_rows(b)
        sa, sb = self.signed_distance(a), self.signed_distance(b)
        hit = (sa * sb <= 0.0)
        out = np.zeros(len(a), dtype=bool)
        if not hit.any():
            return out
        sa, sb, aa, bb = sa[hit], sb[hit], a[hit], b[hit]
        denom = sa - sb
        flat = np.abs(denom) < _EPS
        t = np.where(flat, 0.5, sa / np.where(flat, 1.0, denom))
        x = aa + t[:, None] * (bb - aa)
        inside = self.box.contains(x, tol=1e-12)
        if flat.any():
            # segment lying in the plane: touches if either end is in the patch
            inside[flat] |= self.box.contains(aa[flat], 1e-12) | self.box.contains(bb[flat], 1e-12)
        out[np.flatnonzero(hit)] = inside
        return out

    def line_params(self, a, d) -> np.ndarray:
        a, d = np.asarray(a, float), np.asarray(d, float)
        dn = d @ self.normal
        if abs(dn) < _EPS:
            return np.empty(0)
        t = (self.offset - a @ self.normal) / dn
        return np.array([t]) if self.box.contains(a + t * d, 1e-12) else np.empty(0)

    def _section_points(self, box: Box) -> np.ndarray:
        """Vertices of ``plane ∩ box ∩ self.box``."""
        lo = np.maximum(box.lo_array, self.box.lo_array)
        hi = np.minimum(box.hi_array, self.box.hi_array)
        if np.any(lo >= hi):
            return np.empty((0, self.n))
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        s = corners @ self.normal - self.offset
        pts = [corners[k] for k in np.flatnonzero(np.abs(s) < _EPS)]
        for i, j in itertools.combinations(range(len(corners)), 2):
            # box edges differ in exactly one coordinate
            if np.count_nonzero(corners[i] != corners[j]) != 1:
                continue
            if s[i] * s[j] < 0:
                t = s[i] / (s[i] - s[j])
                pts.append(corners[i] + t * (corners[j] - corners[i]))
        return np.array(pts) if pts else np.empty((0, self.n))

    def area_within(self, box: Box) -> float:
        pts = self._section_points(box)
        if len(pts) < self.n:
            return 0.0
        if self.n == 1:
            return 1.0
        # orthonormal basis of the plane
        q, _ = np.linalg.qr(np.column_stack([self.normal, np.eye(self.n)]))
        local = (pts - pts[0]) @ q[:, 1:self.n]
        if self.n == 2:
            return float(local.max() - local.min())
        try:
            return float(ConvexHull(local).volume)
        except Exception:  # degenerate section
            return 0.0

    @property
    def area(self) -> float:
        return self.area_within(self.box)

    def projected_measure(self, direction, box: Box) -> float:
        """Integral of ``|normal . direction|`` over the patch inside ``box``."""
        direction = np.asarray(direction, float)
        return self.area_within(box) * abs(float(self.normal @ direction))

    def normal_at(self, x) -> np.ndarray:
        return np.broadcast_to(self.normal, np.shape(x)).copy()


def sphere_area(n: int, r: float) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2) * r ** (n - 1)


def ball_volume(n: int, r: float = 1.0) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


class SpherePatch:
    """Spherical cap ``{|x - c| = r, angle(x - c, axis) <= max_angle}``.

    ``max_angle = pi`` gives the whole sphere.
    """

    kind = "sphere"

    def __init__(self, center: Sequence[float], radius: float,
                 axis: Sequence[float] | None = None, max_angle: float = math.pi):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        n = self.center.size
        axis = np.eye(n)[0] if axis is None else np.asarray(axis, float)
        self.axis = axis / np.linalg.norm(axis)
        if not 0 < max_angle <= math.pi:
            raise ValueError("cap angle must lie in (0, pi]")
        self.max_angle = float(max_angle)
        self._cos_max = math.cos(self.max_angle)

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def full(self) -> bool:
        return self.max_angle >= math.pi

    def bounding_box(self) -> Box:
        return Box(tuple(self.center - self.radius), tuple(self.center + self.radius))

    def _on_cap(self, x: np.ndarray) -> np.ndarray:
        if self.full:
            return np.ones(len(x), dtype=bool)
        c = (x - self.center) @ self.axis / self.radius
        return c >= self._cos_max - 1e-12

    def crosses(self, a, b) -> np.ndarray:
        a, b = _as_rows(a), _as_rows(b)
        d = b - a
        f = a - self.center
        A = np.einsum("ij,ij->i", d, d)
        B = 2.0 * np.einsum("ij,ij->i", d, f)
        C = np.einsum("ij,ij->i", f, f) - self.radius ** 2
        disc = B * B - 4 * A * C
        out = np.zeros(len(a), dtype=bool)
        ok = (disc >= 0) & (A > 0)
        if not ok.any():
            return out
        sq = np.sqrt(np.where(ok, disc, 0.0))
        safeA = np.where(ok, A, 1.0)
        for sign in (-1.0, 1.0):
            t = (-B + sign * sq) / (2 * safeA)
            inside = ok & (t >= -1e-12) & (t <= 1 + 1e-12)
            if inside.any():
                idx = np.flatnonzero(inside)
                x = a[idx] + t[idx, None] * d[idx]
                out[idx[self._on_cap(x)]] = True
        return out

    def line_params(self, a, d) -> np.ndarray:
        a, d = np.asarray(a, float), np.asarray(d, float)
        f = a - self.center
        A, B, C = d @ d, 2 * d @ f, f @ f - self.radius ** 2
        disc = B * B - 4 * A * C
        if disc < 0 or A == 0:
            return np.empty(0)
        sq = math.sqrt(disc)
        t = np.array(sorted({(-B - sq) / (2 * A), (-B + sq) / (2 * A)}))
        return t[self._on_cap(a + t[:, None] * d)]

    @property
    def area(self) -> float:
        n, r, th = self.n, self.radius, self.max_angle
        if self.full:
            return sphere_area(n, r)
        if n == 2:
            return 2 * r * th
        if n == 3:
            return 2 * math.pi * r * r * (1 - math.cos(th))
        return sphere_area(n, r) * cap_fraction(n, th)

    def area_within(self, box: Box) -> float:
        if box.contains_box(self.bounding_box()):
            return self.area
        raise NotImplementedError("sphere patches must lie inside the box")

    def projected_measure(self, direction, box: Box) -> float:
        direction = np.asarray(direction, float)
        if not box.contains_box(self.bounding_box()):
            raise NotImplementedError("sphere patches must lie inside the box")
        n, r = self.n, self.radius
        if self.full:
            # the shadow of a sphere is a ball, covered twice
            return 2 * ball_volume(n - 1, r) * float(np.linalg.norm(direction))
        if n == 2:
            phi0 = math.atan2(self.axis[1], self.axis[0])
            psi = math.atan2(direction[1], direction[0])
            dn = float(np.linalg.norm(direction))
            val = integrate.quad(lambda t: abs(math.cos(t - psi)),
                                 phi0 - self.max_angle, phi0 + self.max_angle,
                                 limit=200)[0]
            return r * dn * val
        raise NotImplementedError("projected measure of caps only in n = 2")

    def normal_at(self, x) -> np.ndarray:
        v = _as_rows(x) - self.center
        return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class JumpSurface:
    """Finite union of patches with negligible pairwise overlaps."""

    pieces: tuple = ()

    @property
    def empty(self) -> bool:
        return not self.pieces

    @property
    def total_area(self) -> float:
        return math.fsum(p.area for p in self.pieces)

    def area_within(self, box: Box) -> float:
        return math.fsum(p.area_within(box) for p in self.pieces)

    def projected_measure(self, direction, box: Box) -> float:
        return math.fsum(p.projected_measure(direction, box) for p in self.pieces)

    def crosses(self, a, b) -> np.ndarray:
        a = _as_rows(a)
        out = np.zeros(len(a), dtype=bool)
        for p in self.pieces:
            out |= p.crosses(a, b)
        return out

    def line_params(self, a, d) -> np.ndarray:
        if not self.pieces:
            return np.empty(0)
        return np.sort(np.concatenate([p.line_params(a, d) for p in self.pieces]))


def cap_fraction(n: int, theta: float) -> float:
    """Fraction of the unit sphere area covered by a cap of polar angle theta."""
    if theta >= math.pi:
        return 1.0
    x = math.sin(theta) ** 2
    half = 0.5 * special.betainc((n - 1) / 2, 0.5, x)
    return half if theta <= math.pi / 2 else 1.0 - half
