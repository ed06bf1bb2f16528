import numpy as np
import pytest

from fracfem.approximation import build_vh, classify_cells
from fracfem.fields import affine_field, make_field, planar_jump_field
from fracfem.geometry import Box
from fracfem.interpolation import (ZEROED, DiscreteField, affine_gradient, cell_simplices,
                                   difference_quotient, edge_crossings, evaluate_interpolant,
                                   evaluate_vh, locate, quotients, sample_vertices,
                                   simplex_gradients)
from fracfem.lattice import LatticeSpec, Simplex, freudenthal_partition
from fracfem.symalg import sym


def single_cell(n, h, values):
    spec = LatticeSpec.create(Box((0.0,) * n, (h,) * n), h)
    lo, _ = spec.omega_cell_range()
    return DiscreteField(spec, lo, np.asarray(values, float), np.zeros((1,) * n, dtype=np.int8))


def eval_in_cell(df, rel_cell, x):
    """Interpolant of one given cell at x (which may sit on its boundary)."""
    origin = df.spec.shift + df.h * (df.cell_lo + rel_cell)
    local = (x - origin) / df.h
    for s in freudenthal_partition(df.n):
        lam = s.barycentric(local[None])[0]
        if np.all(lam >= -1e-9):
            return sum(l * df.values[tuple(rel_cell + v)] for l, v in zip(lam, s.vertices))
    raise AssertionError("point not in cell")


class TestSampleVertices:
    """Vertex sampling on the active cells."""

    def test_affine_values(self):
        M, b = np.array([[1.0, 2], [3, -1]]), np.array([0.5, 0.25])
        spec = LatticeSpec.create(Box.unit(2), 0.25, (0.3, 0.6))
        df = sample_vertices(affine_field(M, b), spec)
        X = df.vertex_coords()
        assert np.allclose(df.values, X @ M.T + b)
        assert not df.bad.any()

    def test_identity_field_gives_coordinates(self):
        df = sample_vertices(affine_field(np.eye(2)), LatticeSpec.create(Box.unit(2), 0.5))
        assert np.array_equal(df.values, df.vertex_coords())

    def test_two_region_straddle(self):
        u = planar_jump_field(2)
        df = sample_vertices(u, LatticeSpec.create(Box.unit(2), 1 / 8, (0.5, 0.5)))
        X = df.vertex_coords()
        right = X[..., 0] > 0.5
        assert np.allclose(df.values[right], [1, 0]) and np.allclose(df.values[~right], 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sample_vertices(affine_field(np.eye(3)), LatticeSpec.create(Box.unit(2), 0.5))


class TestGradients:
    """Per-simplex gradients and the edge quotients."""

    def test_example_identity(self):
        vals = np.zeros((2, 2, 2))
        vals[0, 0], vals[1, 0], vals[1, 1] = (0, 0), (1, 0), (1, 1)
        vals[0, 1] = (7, -3)  # not a vertex of the first simplex
        df = single_cell(2, 1.0, vals)
        G = affine_gradient(df, df.cell_lo, Simplex.from_permutation((0, 1)))
        assert np.allclose(G, np.eye(2))

    def test_constant_field(self):
        df = single_cell(3, 0.5, np.ones((2, 2, 2, 3)))
        for k, s in enumerate(freudenthal_partition(3)):
            assert np.allclose(affine_gradient(df, df.cell_lo, s), 0)
            assert np.allclose(simplex_gradients(df, k), 0)

    def test_chain_formula_matches_solve(self):
        rng = np.random.default_rng(0)
        df = single_cell(3, 0.3, rng.normal(size=(2, 2, 2, 3)))
        for k, s in enumerate(freudenthal_partition(3)):
            assert np.allclose(simplex_gradients(df, k)[0, 0, 0],
                               affine_gradient(df, df.cell_lo, s), atol=1e-12)

    def test_quotient_example(self):
        M = np.array([[1.0, 2], [0, 3]])
        spec = LatticeSpec.create(Box.unit(2), 0.25, (0.1, 0.4))
        df = sample_vertices(affine_field(M), spec)
        S = Simplex.from_permutation((0, 1))
        j = [tuple(d) for d in S.edges.directions].index((1, 1))
        assert difference_quotient(df, df.cell_lo + 2, S, j) == pytest.approx(3.0)

    def test_quotient_outside_lattice_is_zero(self):
        df = sample_vertices(affine_field(np.eye(2)), LatticeSpec.create(Box.unit(2), 0.25))
        S = freudenthal_partition(2)[0]
        assert difference_quotient(df, df.cell_lo - 1, S, 0) == 0.0
        assert difference_quotient(df, df.cell_lo + np.array(df.cell_shape), S, 0) == 0.0

    @pytest.mark.parametrize("n", [2, 3])
    def test_quotient_strain_identity(self, n):
        rng = np.random.default_rng(n)
        for _ in range(10):
            h = rng.uniform(0.1, 1.0)
            df = single_cell(n, h, rng.normal(size=(2,) * n + (n,)))
            for k, s in enumerate(freudenthal_partition(n)):
                E = sym(affine_gradient(df, df.cell_lo, s))
                nu = s.edges.unit()
                want = np.einsum("ja,ab,jb->j", nu, E, nu)
                got = [difference_quotient(df, df.cell_lo, s, j) for j in range(len(nu))]
                assert np.allclose(got, want, atol=1e-10)
                assert np.allclose(quotients(df, k).reshape(-1), want, atol=1e-10)

    def test_pairwise_vertex_identity(self):
        """e(w) nu . nu equals the difference quotient for every vertex pair of S."""
        rng = np.random.default_rng(9)
        df = single_cell(3, 0.5, rng.normal(size=(2, 2, 2, 3)))
        for s in freudenthal_partition(3):
            E = sym(affine_gradient(df, df.cell_lo, s))
            for a in s.vertices:
                for b in s.vertices:
                    if np.array_equal(a, b):
                        continue
                    d = (a - b) * df.h
                    nu = d / np.linalg.norm(d)
                    diff = df.values[tuple(a)] - df.values[tuple(b)]
                    assert nu @ E @ nu == pytest.approx(diff @ nu / np.linalg.norm(d), abs=1e-10)


class TestEvaluate:
    """Barycentric evaluation, affine exactness and conformity."""

    @pytest.mark.parametrize("n", [2, 3])
    def test_affine_reproduction(self, n):
        rng = np.random.default_rng(n)
        D = Box.unit(n)
        M, b = rng.normal(size=(n, n)), rng.normal(size=n)
        u = affine_field(M, b)
        for h in (1 / 4, 1 / 8):
            df = sample_vertices(u, LatticeSpec.create(D, h, rng.random(n)))
            x = rng.random((1000, n))
            assert np.max(np.abs(evaluate_interpolant(df, x) - u.values(x))) <= 1e-10

    def test_vertex_and_barycenter(self):
        rng = np.random.default_rng(4)
        df = single_cell(2, 0.5, rng.normal(size=(2, 2, 2)))
        X = df.vertex_coords()
        assert np.allclose(evaluate_interpolant(df, X.reshape(-1, 2)), df.values.reshape(-1, 2))
        S = freudenthal_partition(2)[1]
        verts = df.spec.shift + df.h * S.vertices
        vals = np.array([df.values[tuple(v)] for v in S.vertices])
        assert np.allclose(evaluate_interpolant(df, verts.mean(axis=0)[None])[0], vals.mean(axis=0))

    def test_locate_barycentric_weights(self):
        spec = LatticeSpec.create(Box.unit(2), 0.25, (0.5, 0.5))
        df = sample_vertices(affine_field(np.eye(2)), spec)
        x = np.random.default_rng(0).random((200, 2))
        cell, simplex, lam = locate(df, x)
        assert np.allclose(lam.sum(axis=1), 1) and lam.min() >= -1e-12

    def test_outside_lattice_raises(self):
        df = sample_vertices(affine_field(np.eye(2)), LatticeSpec.create(Box.unit(2), 0.25))
        with pytest.raises(ValueError):
            evaluate_interpolant(df, [[5.0, 5.0]])

    @pytest.mark.parametrize("name", ["quadratic", "trig", "planar_jump", "sphere_jump"])
    def test_face_continuity(self, name):
        rng = np.random.default_rng(6)
        u = make_field(name, 2)
        vh = build_vh(classify_cells(sample_vertices(u, LatticeSpec.create(Box.unit(2), 1 / 8, rng.random(2))), u))
        good = ~vh.bad
        checked = 0
        for axis in range(2):
            step = np.eye(2, dtype=int)[axis]
            for c in np.argwhere(good):
                d = c + step
                if np.any(d >= np.array(vh.cell_shape)) or not good[tuple(d)]:
                    continue
                origin = vh.spec.shift + vh.h * (vh.cell_lo + d)
                t = rng.random()
                x = origin + vh.h * t * np.eye(2)[1 - axis]
                assert np.allclose(eval_in_cell(vh, c, x), eval_in_cell(vh, d, x), atol=1e-10)
                checked += 1
        assert checked > 50

    def test_zeroed_cells(self):
        u = planar_jump_field(2)
        vh = build_vh(classify_cells(sample_vertices(u, LatticeSpec.create(Box.unit(2), 1 / 8, (0.4, 0.4))), u))
        z = np.argwhere(vh.flags == ZEROED)[0]
        x = vh.spec.shift + vh.h * (vh.cell_lo + z + 0.5)
        assert np.allclose(evaluate_vh(vh, x[None]), 0)
        with pytest.raises(ValueError):
            evaluate_interpolant(vh, x[None])


class TestCrossings:
    """Jump indicators of lattice segments."""

    def test_shapes_and_jump_free(self):
        df = sample_vertices(make_field("quadratic", 3), LatticeSpec.create(Box.unit(3), 0.25))
        cr = edge_crossings(df, make_field("quadratic", 3))
        assert len(cr) == 7
        for e, a in cr.items():
            assert a.shape == tuple(np.array(df.vertex_shape) - e) and not a.any()

    def test_cell_simplices_volume(self):
        df = sample_vertices(affine_field(np.eye(2)), LatticeSpec.create(Box.unit(2), 0.25, (0.2, 0.2)))
        S, cflat, k = cell_simplices(df)
        from fracfem.quadrature import volumes
        assert volumes(S).sum() == pytest.approx(df.n_cells * 0.25 ** 2)
