import math

import numpy as np
import pytest

from fracfem.approximation import (ApproxReport, build_vh, classify_cells, reference_bulk,
                                   run_approximation, surface_target)
from fracfem.energies import surface_constant_multiplicity
from fracfem.fields import make_field, planar_jump_field, segment_crosses_jump, sphere_jump_field
from fracfem.geometry import Box
from fracfem.interpolation import BAD, GOOD, ZEROED, sample_vertices
from fracfem.lattice import LatticeSpec, enumerate_cells
from fracfem.symalg import default_energy_directions

UNIT = Box.unit(2)


def classified(u, h, y=(0.37, 0.61), domain=UNIT):
    return classify_cells(sample_vertices(u, LatticeSpec.create(domain, h, y)), u)


def brute_force_bad(u, spec):
    """Bad cells by walking every cell and testing each simplex edge on its own."""
    bad = set()
    for rec in enumerate_cells(spec, inside_only=True):
        for b, e in rec.edges:
            a = spec.cell_origin(np.array(b))
            if segment_crosses_jump(u, a, a + spec.h * np.array(e)):
                bad.add(rec.index)
                break
    return bad


class TestClassification:
    """Good/bad cells."""

    def test_jump_free(self):
        df = classified(make_field("quadratic", 2), 1 / 8)
        assert not df.bad.any() and df.witnesses == {}

    @pytest.mark.parametrize("field,y", [("planar_jump", (0.37, 0.61)),
                                         ("sphere_jump", (0.1, 0.9)),
                                         ("sphere_jump", (0.0, 0.0))])
    def test_matches_brute_force(self, field, y):
        u = make_field(field, 2)
        spec = LatticeSpec.create(UNIT, 1 / 8, y)
        df = classify_cells(sample_vertices(u, spec), u)
        got = {tuple(int(v) for v in df.cell_lo + c) for c in np.argwhere(df.bad)}
        assert got == brute_force_bad(u, spec)
        assert set(df.witnesses) == got

    def test_witnesses_cross(self):
        u = sphere_jump_field(2)
        df = classified(u, 1 / 16)
        h, shift = df.h, df.spec.shift
        for cell, (base, e) in df.witnesses.items():
            a = shift + h * np.array(base)
            assert segment_crosses_jump(u, a, a + h * np.array(e))
            assert all(0 <= bv - cv <= 1 for bv, cv in zip(base, cell))

    def test_planar_strip(self):
        u = planar_jump_field(2)
        df = classified(u, 1 / 8)
        from fracfem.energies import bad_volume
        assert bad_volume(build_vh(df), UNIT) == pytest.approx(1 / 8)

    def test_sphere_bad_cells_in_annulus(self):
        u = sphere_jump_field(2)
        df = classified(u, 1 / 32)
        centers = df.spec.shift + df.h * (df.cell_lo + np.argwhere(df.bad) + 0.5)
        d = np.linalg.norm(centers - 0.5, axis=1)
        assert np.all(np.abs(d - 0.3) <= df.h * math.sqrt(2) * 0.5 + df.h * math.sqrt(2))
        assert df.bad.sum() > 0


class TestVh:
    """The approximating field."""

    def test_all_good(self):
        df = classified(make_field("affine", 2), 1 / 8)
        assert (build_vh(df).flags == GOOD).all()

    def test_bad_become_zeroed(self):
        df = classified(planar_jump_field(2), 1 / 8)
        vh = build_vh(df)
        assert np.array_equal(vh.flags == ZEROED, df.flags == BAD)
        assert not vh.bad.any() or np.array_equal(vh.bad, df.bad)

    def test_all_bad_has_no_bulk(self):
        df = classified(make_field("affine", 2), 1 / 8)
        from dataclasses import replace
        from fracfem.energies import continuum_bulk_energy
        vh = build_vh(replace(df, flags=np.full(df.cell_shape, BAD, dtype=np.int8)))
        assert continuum_bulk_energy(vh, UNIT, default_energy_directions(2, 2)) == 0


class TestRun:
    """One approximation run."""

    def spec(self, h, y=(0.37, 0.61)):
        return LatticeSpec.create(UNIT, h, y)

    def test_columns(self):
        assert ApproxReport.columns()[:3] == ("n", "p", "field")
        assert "witnesses_ok" in ApproxReport.columns()

    def test_affine(self):
        u = make_field("affine", 2)
        dirs = default_energy_directions(2, 2)
        r = run_approximation(u, dirs, self.spec(1 / 8))
        assert r.status == "ok" and r.lp_error < 1e-12
        assert r.continuum_bulk_vh == pytest.approx(r.continuum_bulk_u, rel=1e-12)
        assert r.bad_cells == 0 and r.sigma_dedup == 0 and r.witnesses_ok

    def test_planar_piecewise_constant(self):
        u = planar_jump_field(2)
        r = run_approximation(u, default_energy_directions(2, 2), self.spec(1 / 64))
        assert r.discrete_bulk == 0
        assert 1 <= r.sigma_dedup / r.jump_area_u <= surface_constant_multiplicity(2)
        assert r.surface_target == pytest.approx(8 * math.sqrt(2) + 8)

    def test_surface_only(self):
        u = make_field("quadratic", 2)
        r = run_approximation(u, default_energy_directions(2, 2), self.spec(1 / 8),
                              continuum=False, continuum_bulk_u=1.5)
        assert r.status == "ok:surface-only"
        assert math.isnan(r.lp_error) and r.continuum_bulk_u == 1.5

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            run_approximation(make_field("affine", 3), default_energy_directions(2, 2), self.spec(1 / 8))

    def test_failure_is_reported(self):
        u = make_field("quadratic", 2, margin=0.01)
        r = run_approximation(u, default_energy_directions(2, 2), self.spec(1 / 4))
        assert r.status.startswith("failed:") and math.isnan(r.discrete_bulk)

    def test_inequality_chain(self):
        dirs = default_energy_directions(2, 2)
        for name in ("planar_jump", "sphere_jump"):
            r = run_approximation(make_field(name, 2), dirs, self.spec(1 / 32), rtol=1e-4,
                                  budget=20_000)
            assert r.continuum_bulk_vh + r.sigma_dedup <= r.discrete_bulk + r.discrete_surface


class TestConvergence:
    """Rates over h."""

    def test_quadratic_bulk_rate(self):
        u = make_field("quadratic", 2)
        dirs = default_energy_directions(2, 2)
        ref = reference_bulk(u, dirs, UNIT)
        rng = np.random.default_rng(3)
        hs, errs = [1 / 8, 1 / 16, 1 / 32, 1 / 64], []
        for h in hs:
            vals = [run_approximation(u, dirs, LatticeSpec.create(UNIT, h, rng.random(2)),
                                      continuum=False).discrete_bulk for _ in range(8)]
            errs.append(abs(np.mean(vals) - ref))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert 0.7 <= slope <= 1.3

    def test_planar_bad_volume_over_h(self):
        u = planar_jump_field(2, normal=[1, 0.3], point=[0.45, 0.5])
        dirs = default_energy_directions(2, 2)
        rng = np.random.default_rng(4)
        for h in (1 / 16, 1 / 64):
            r = run_approximation(u, dirs, LatticeSpec.create(UNIT, h, rng.random(2)), continuum=False)
            assert 0.5 <= r.bad_volume / h <= 3

    def test_lp_decreases(self):
        u = sphere_jump_field(2)
        dirs = default_energy_directions(2, 1.5)
        rng = np.random.default_rng(5)
        means = []
        for h in (1 / 8, 1 / 32):
            vals = [run_approximation(u, dirs, LatticeSpec.create(UNIT, h, rng.random(2)), rtol=1e-3,
                                      budget=10_000).lp_error for _ in range(8)]
            means.append(np.mean(vals))
        assert means[1] < means[0]
        assert means[1] / means[0] < (1 / 4) ** (1 / 1.5) * 1.5


def test_surface_target_sphere():
    u = sphere_jump_field(2)
    # the projected measure of a circle onto any unit direction is 4 r
    assert surface_target(u, UNIT) == pytest.approx(8 * math.sqrt(2) * 3 * 4 * 0.3, rel=1e-9)
