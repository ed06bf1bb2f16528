"""Piecewise-analytic displacement fields with explicit strain and jump set.

A field is a list of regions tried in order; the first region whose closed
indicator holds at ``x`` supplies the value.  Catalog fields put the region on
the ``-normal`` side of each jump first, so lattice points lying exactly on
the jump surface take that side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Box, HyperplanePatch, JumpSurface, SpherePatch
from .symalg import EnergyDirections, sym

Array = np.ndarray


@dataclass(frozen=True)
class Region:
    indicator: Callable[[Array], Array]
    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array]
    affine: tuple[Array, Array] | None = None  # (M, b) when the region value is M x + b


def _rows(x, n: int) -> Array:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != n:
        raise ValueError(f"expected points of dimension {n}, got {x.shape[1]}")
    return x


def affine_region(M, b, indicator=None) -> Region:
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    ind = indicator or (lambda x: np.ones(len(x), dtype=bool))
    return Region(ind,
                  lambda x: x @ M.T + b,
                  lambda x: np.broadcast_to(M, (len(x),) + M.shape).copy(),
                  (M, b))


@dataclass(frozen=True, eq=False)
class TestField:
    """A displacement field on ``box`` with closed-form strain and jump set."""

    __test__ = False  # not a pytest class

    name: str
    n: int
    box: Box
    regions: tuple[Region, ...]
    jump: JumpSurface = field(default_factory=JumpSurface)
    params: dict = field(default_factory=dict)
    bulk_energy: Callable[[EnergyDirections, Box], float | None] | None = None

    def region_index(self, x) -> Array:
        x = _rows(x, self.n)
        if not np.all(self.box.contains(x, 1e-12)):
            bad = x[~self.box.contains(x, 1e-12)][0]
            raise ValueError(f"point {bad} outside the field domain {self.box}")
        out = np.full(len(x), -1)
        for k, reg in enumerate(self.regions):
            free = out < 0
            if not free.any():
                break
            hit = np.zeros(len(x), dtype=bool)
            hit[free] = reg.indicator(x[free])
            out[hit] = k
        if np.any(out < 0):
            raise ValueError("point not covered by any region")
        return out

    def values(self, x) -> Array:
        x = _rows(x, self.n)
        idx = self.region_index(x)
        out = np.empty_like(x)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.regions[k].value(x[m])
        return out

    def gradients(self, x) -> Array:
        x = _rows(x, self.n)
        idx = self.region_index(x)
        out = np.empty((len(x), self.n, self.n))
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.regions[k].gradient(x[m])
        return out

    def strains(self, x) -> Array:
        return sym(self.gradients(x))

    def eval(self, x) -> Array:
        return self.values(np.asarray(x, dtype=float)[None])[0]

    def strain(self, x) -> Array:
        return self.strains(np.asarray(x, dtype=float)[None])[0]

    def segment_crosses_jump(self, a, b) -> Array:
        return self.jump.crosses(a, b)

    def jump_area(self, domain: Box) -> float:
        return self.jump.area_within(domain)

    def analytic_bulk_energy(self, dirs: EnergyDirections, domain: Box) -> float | None:
        return None if self.bulk_energy is None else self.bulk_energy(dirs, domain)

    @property
    def piecewise_affine(self) -> bool:
        return all(r.affine is not None for r in self.regions)


def segment_crosses_jump(u: TestField, a, b) -> bool:
    return bool(u.segment_crosses_jump(np.asarray(a, float)[None], np.asarray(b, float)[None])[0])


def default_box(domain: Box, margin: float = 0.5) -> Box:
    return domain.dilate(margin)


# --- catalog ---------------------------------------------------------------

def affine_field(M, b=None, box: Box | None = None, name: str = "affine") -> TestField:
    M = np.array(M, dtype=float)
    n = M.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    box = box or default_box(Box.unit(n))
    E = sym(M)

    def bulk(dirs, domain):
        return float(dirs.density(E)) * domain.volume

    return TestField(name, n, box, (affine_region(M, b),),
                     params={"M": M.tolist(), "b": b.tolist()}, bulk_energy=bulk)


def rigid_field(W, b=None, box: Box | None = None) -> TestField:
    W = np.array(W, dtype=float)
    if not np.allclose(W, -W.T):
        raise ValueError("rigid motion needs a skew-symmetric matrix")
    return affine_field(W, b, box, name="rigid")


def default_skew(n: int) -> Array:
    W = np.zeros((n, n))
    if n >= 2:
        W[0, 1], W[1, 0] = 1.0, -1.0
    return W


def quadratic_field(n: int, scale: float = 1.0, box: Box | None = None) -> TestField:
    """``u(x) = scale * x_1 * x``; strain ``scale * (x_1 I + sym(x e_1^T))``."""
    box = box or default_box(Box.unit(n))
    eye = np.eye(n)

    def value(x):
        return scale * x[:, :1] * x

    def grad(x):
        g = x[:, 0, None, None] * eye
        g[:, :, 0] += x
        return scale * g

    return TestField("quadratic", n, box,
                     (Region(lambda x: np.ones(len(x), bool), value, grad),),
                     params={"scale": scale})


def trig_field(n: int, amplitude: float = 0.1, box: Box | None = None) -> TestField:
    """``u_i = a sin(pi x_i) cos(pi x_{i+1})`` (indices mod n)."""
    box = box or default_box(Box.unit(n))
    nxt = [(i + 1) % n for i in range(n)]
    a = amplitude
    pi = math.pi

    def value(x):
        return a * np.sin(pi * x) * np.cos(pi * x[:, nxt])

    def grad(x):
        g = np.zeros((len(x), n, n))
        for i, j in enumerate(nxt):
            if j == i:
                g[:, i, i] = a * pi * np.cos(2 * pi * x[:, i])
            else:
                g[:, i, i] = a * pi * np.cos(pi * x[:, i]) * np.cos(pi * x[:, j])
                g[:, i, j] = -a * pi * np.sin(pi * x[:, i]) * np.sin(pi * x[:, j])
        return g

    return TestField("trig", n, box, (Region(lambda x: np.ones(len(x), bool), value, grad),),
                     params={"amplitude": a})


def planar_jump_field(n: int, normal=None, point=None, jump=None,
                      M_minus=None, b_minus=None, M_plus=None,
                      box: Box | None = None) -> TestField:
    """Piecewise-affine field jumping across a hyperplane.

    ``u = M_minus x + b_minus`` on the ``-normal`` side (closed) and
    ``u = M_plus x + b_minus + jump`` on the other side.  The default is the
    piecewise constant jump ``e_1`` across ``{x_1 = 1/2}``.
    """
    box = box or default_box(Box.unit(n))
    normal = np.eye(n)[0] if normal is None else np.asarray(normal, float)
    normal = normal / np.linalg.norm(normal)
    point = np.full(n, 0.5) if point is None else np.asarray(point, float)
    jump = np.eye(n)[0] if jump is None else np.asarray(jump, float)
    M_minus = np.zeros((n, n)) if M_minus is None else np.asarray(M_minus, float)
    M_plus = M_minus if M_plus is None else np.asarray(M_plus, float)
    b_minus = np.zeros(n) if b_minus is None else np.asarray(b_minus, float)
    # keep the traces on the plane differing by exactly `jump` at `point`
    b_plus = b_minus + jump + (M_minus - M_plus) @ point
    offset = float(point @ normal)
    patch = HyperplanePatch(point, normal, box)
    minus = affine_region(M_minus, b_minus, lambda x: x @ normal - offset <= 0.0)
    plus = affine_region(M_plus, b_plus)
    E_minus, E_plus = sym(M_minus), sym(M_plus)

    def bulk(dirs, domain):
        vm = _halfspace_box_volume(domain, normal, offset)
        return float(dirs.density(E_minus)) * vm + float(dirs.density(E_plus)) * (domain.volume - vm)

    return TestField("planar_jump", n, box, (minus, plus), JumpSurface((patch,)),
                     params={"normal": normal.tolist(), "point": point.tolist(),
                             "jump": jump.tolist()},
                     bulk_energy=bulk)


def sphere_jump_field(n: int, center=None, radius: float = 0.3, W=None, b=None,
                      box: Box | None = None) -> TestField:
    """Rigid motion ``W x + b`` inside the closed ball, zero outside."""
    box = box or default_box(Box.unit(n))
    center = np.full(n, 0.5) if center is None else np.asarray(center, float)
    W = default_skew(n) if W is None else np.asarray(W, float)
    if not np.allclose(W, -W.T):
        raise ValueError("sphere field needs a skew-symmetric matrix")
    b = np.eye(n)[0] if b is None else np.asarray(b, float)
    r2 = radius * radius
    inside = affine_region(W, b, lambda x: np.sum((x - center) ** 2, axis=1) <= r2)
    outside = affine_region(np.zeros((n, n)), np.zeros(n))
    return TestField("sphere_jump", n, box, (inside, outside),
                     JumpSurface((SpherePatch(center, radius),)),
                     params={"center": center.tolist(), "radius": radius},
                     bulk_energy=lambda dirs, domain: 0.0)


def piecewise_affine_field(regions: Sequence[dict], box: Box, jump: JumpSurface | None = None,
                           name: str = "piecewise_affine") -> TestField:
    """Custom field from records ``{"halfspaces": [(a, c), ...], "M": ..., "b": ...}``.

    A region is the intersection of the closed half-spaces ``a . x <= c``; an
    empty list covers everything.  Without an explicit jump surface every
    half-space boundary plane is treated as a potential jump (conservative).
    """
    n = box.n
    regs, planes = [], {}
    for rec in regions:
        hs = [(np.asarray(a, float), float(c)) for a, c in rec.get("halfspaces", [])]

        def ind(x, hs=hs):
            ok = np.ones(len(x), dtype=bool)
            for a, c in hs:
                ok &= x @ a <= c
            return ok

        M = np.asarray(rec.get("M", np.zeros((n, n))), float)
        b = np.asarray(rec.get("b", np.zeros(n)), float)
        regs.append(affine_region(M, b, ind))
        for a, c in hs:
            na = np.linalg.norm(a)
            key = tuple(np.round(np.append(a, c) / na, 12))
            planes.setdefault(key, HyperplanePatch(a * c / na ** 2, a, box))
    if jump is None:
        jump = JumpSurface(tuple(planes.values()))
    return TestField(name, n, box, tuple(regs), jump, params={"regions": len(regs)})


def _halfspace_box_volume(domain: Box, normal: Array, offset: float) -> float:
    """Volume of ``{x in domain : x . normal <= offset}``."""
    nz = np.flatnonzero(np.abs(normal) > 1e-14)
    if len(nz) == 1:
        i = nz[0]
        t = offset / normal[i]
        lo, hi = domain.lo[i], domain.hi[i]
        frac = (min(max(t, lo), hi) - lo) / (hi - lo)
        if normal[i] < 0:
            frac = 1.0 - frac
        return domain.volume * frac
    # general normal: inclusion-exclusion over box corners of the simplex-cut formula
    L = domain.hi_array - domain.lo_array
    c = offset - normal @ domain.lo_array
    a = (normal * L)[nz]
    n = len(nz)
    # volume of {s in [0,1]^n : a.s <= c} with signs folded to positive a
    neg = a < 0
    c = c - a[neg].sum()
    a = np.abs(a)
    tot = 0.0
    for mask in range(1 << n):
        bits = [(mask >> k) & 1 for k in range(n)]
        r = c - sum(a[k] for k in range(n) if bits[k])
        if r > 0:
            tot += (-1) ** sum(bits) * r ** n
    frac = tot / (math.factorial(n) * math.prod(a))
    return domain.volume * min(max(frac, 0.0), 1.0)


CATALOG = ("affine", "rigid", "quadratic", "trig", "planar_jump", "sphere_jump")


def make_field(name: str, n: int, domain: Box | None = None, margin: float = 0.5,
               **params) -> TestField:
    """Build a catalog field on ``domain`` dilated by ``margin``."""
    domain = domain or Box.unit(n)
    box = default_box(domain, margin)
    center = (domain.lo_array + domain.hi_array) / 2
    if name == "affine":
        M = params.get("M")
        if M is None:
            M = np.arange(1, n * n + 1, dtype=float).reshape(n, n) / (n * n)
        return affine_field(M, params.get("b"), box)
    if name == "rigid":
        return rigid_field(params.get("W", default_skew(n)), params.get("b"), box)
    if name == "quadratic":
        return quadratic_field(n, float(params.get("scale", 1.0)), box)
    if name == "trig":
        return trig_field(n, float(params.get("amplitude", 0.1)), box)
    if name == "planar_jump":
        return planar_jump_field(n, params.get("normal"), params.get("point", center),
                                 params.get("jump"), params.get("M_minus"),
                                 params.get("b_minus"), params.get("M_plus"), box)
    if name == "sphere_jump":
        return sphere_jump_field(n, params.get("center", center),
                                 float(params.get("radius", 0.3)), params.get("W"),
                                 params.get("b"), box)
    raise KeyError(f"unknown field {name!r}; catalog: {', '.join(CATALOG)}")


# --- slicing ---------------------------------------------------------------

@dataclass(frozen=True)
class SliceReport:
    ok: bool
    jumps_ok: bool
    derivative_ok: bool
    detected: tuple[float, ...]
    trace: tuple[float, ...]
    max_derivative_error: float


def slice_check(u: TestField, xi, y, samples: int = 4001, rtol: float = 1e-4,
                jump_tol: float = 1e-6, fd_step: float | None = None) -> SliceReport:
    """Check the 1-D slice ``t -> u(y + t xi) . xi`` against the analytic jump trace.

    Jumps of the slice are detected from sample increments that the strain
    ``e(u) xi . xi`` cannot explain; each must bracket a crossing of the line
    with the jump set.  Away from crossings, central differences of the slice
    must match ``e(u) xi . xi`` to ``rtol``.
    """
    xi = np.asarray(xi, float)
    xi = xi / np.linalg.norm(xi)
    y = np.asarray(y, float)
    span = u.box.line_interval(y, xi)
    if span is None or span[1] - span[0] < 1e-12:
        raise ValueError("slice line misses the field domain")
    t0, t1 = span
    pad = 1e-9 * (t1 - t0)
    t = np.linspace(t0 + pad, t1 - pad, samples)
    dt = t[1] - t[0]
    pts = y + t[:, None] * xi
    f = u.values(pts) @ xi
    g = np.einsum("i,nij,j->n", xi, u.strains(pts), xi)
    trace = u.jump.line_params(y, xi)
    trace = trace[(trace >= t0) & (trace <= t1)]

    scale = max(1.0, float(np.max(np.abs(f))))
    resid = np.abs(np.diff(f) - 0.5 * dt * (g[1:] + g[:-1]))
    flagged = np.flatnonzero(resid > jump_tol * scale)
    detected = 0.5 * (t[flagged] + t[flagged + 1])
    jumps_ok = all(np.any((trace >= t[k] - dt) & (trace <= t[k + 1] + dt)) for k in flagged)

    step = fd_step if fd_step is not None else 1e-5 * u.box.diameter
    far = np.ones(samples, dtype=bool)
    for s in trace:
        far &= np.abs(t - s) > 2 * step + 1e-9
    far &= (t - step > t0) & (t + step < t1)
    tf = t[far]
    fp = u.values(y + (tf + step)[:, None] * xi) @ xi
    fm = u.values(y + (tf - step)[:, None] * xi) @ xi
    fd = (fp - fm) / (2 * step)
    gs = g[far]
    # zero-strain slices (rigid pieces) are measured against |f| / diameter
    gscale = max(float(np.max(np.abs(g))) if len(g) else 0.0,
                 float(np.max(np.abs(f))) / u.box.diameter, 1e-8)
    denom = np.maximum(np.abs(gs), gscale)
    err = np.abs(fd - gs) / denom
    max_err = float(err.max()) if len(err) else 0.0
    der_ok = max_err <= rtol
    return SliceReport(jumps_ok and der_ok, jumps_ok, der_ok,
                       tuple(float(v) for v in detected), tuple(float(v) for v in trace), max_err)
