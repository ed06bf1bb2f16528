import itertools
import math
import warnings

import numpy as np
import pytest

from fracfem.geometry import Box
from fracfem.lattice import (MAX_DIM, LatticeSpec, Simplex, cell_edges, distinct_direction_union,
                             edge_directions, enumerate_cells, face_key, freudenthal_partition,
                             locate_simplex)
from fracfem.symalg import sym_dim, to_upper


def vset(S):
    return {tuple(int(c) for c in v) for v in S.vertices}


class TestFreudenthalPartition:
    """Simplex count, vertex chains, volumes and the partition property."""

    def test_n1_is_the_unit_segment(self):
        (S,) = freudenthal_partition(1)
        assert vset(S) == {(0,), (1,)}

    def test_n2_triangles(self):
        got = {frozenset(vset(S)) for S in freudenthal_partition(2)}
        assert got == {frozenset({(0, 0), (1, 0), (1, 1)}), frozenset({(0, 0), (0, 1), (1, 1)})}

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_count_and_volume(self, n):
        S = freudenthal_partition(n)
        assert len(S) == math.factorial(n)
        for s in S:
            assert s.volume() == pytest.approx(1 / math.factorial(n), rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_maximal_chain(self, n):
        for s in freudenthal_partition(n):
            v = s.vertices
            assert np.array_equal(v[0], np.zeros(n)) and np.array_equal(v[-1], np.ones(n))
            steps = np.diff(v, axis=0)
            for i, axis in enumerate(s.permutation):
                assert np.array_equal(steps[i], np.eye(n, dtype=int)[axis])

    @pytest.mark.parametrize("n", [0, MAX_DIM + 1])
    def test_rejects_bad_dimension(self, n):
        with pytest.raises(ValueError):
            freudenthal_partition(n)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_partition_property(self, n):
        rng = np.random.default_rng(n)
        x = rng.random((10_000, n))
        S = freudenthal_partition(n)
        strict = np.stack([np.all(s.barycentric(x) > 0, axis=1) for s in S])
        assert np.all(strict.sum(axis=0) == 1)
        k = locate_simplex(x)
        lam = np.stack([S[j].barycentric(x[i]) for i, j in enumerate(k[:500])])
        assert lam.min() >= -1e-12

    def test_membership_is_nonincreasing_coordinates(self):
        x = np.array([[0.2, 0.9, 0.5]])
        (k,) = locate_simplex(x)
        perm = freudenthal_partition(3)[k].permutation
        assert list(x[0, list(perm)]) == sorted(x[0], reverse=True)

    def test_boundary_tie_goes_to_smallest_permutation(self):
        x = np.array([[0.4, 0.4]])
        assert freudenthal_partition(2)[locate_simplex(x)[0]].permutation == (0, 1)

    def test_equality_by_permutation(self):
        a = Simplex.from_permutation((1, 0))
        assert a == freudenthal_partition(2)[1] and hash(a) == hash(freudenthal_partition(2)[1])


class TestEdgeDirections:
    """Edge directions, base vertices and the basis property of their dyads."""

    def test_n2_example(self):
        S = Simplex.from_permutation((0, 1))
        es = edge_directions(S)
        pairs = {(tuple(d), tuple(b)) for d, b in zip(es.directions, es.base_points)}
        assert pairs == {((1, 0), (0, 0)), ((1, 1), (0, 0)), ((0, 1), (1, 0))}

    def test_n2_gram_determinant(self):
        es = edge_directions(Simplex.from_permutation((0, 1)))
        B = es.dyads().reshape(3, -1)
        assert abs(np.linalg.det(B @ B.T)) > 1e-3

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_cardinality_and_spanning(self, n):
        for s in freudenthal_partition(n):
            es = s.edges
            assert len(es) == n * (n + 1) // 2
            assert set(np.unique(es.directions)) <= {0, 1}
            assert np.all(es.directions.sum(axis=1) >= 1)
            assert np.all(np.linalg.norm(es.directions, axis=1) <= math.sqrt(n) + 1e-15)
            coords = to_upper(es.dyads())
            gram = coords @ coords.T
            assert np.linalg.matrix_rank(coords) == sym_dim(n)
            assert abs(np.linalg.det(gram)) > 1e-8

    @pytest.mark.parametrize("n", [2, 3])
    def test_each_direction_realised_by_one_pair(self, n):
        for s in freudenthal_partition(n):
            diffs = [tuple(s.vertices[i] - s.vertices[k])
                     for k, i in itertools.combinations(range(n + 1), 2)]
            assert len(diffs) == len(set(diffs))


class TestDirectionUnion:
    """The deduplicated union of edge directions."""

    def test_n1(self):
        assert distinct_direction_union(1).tolist() == [[1]]

    def test_n2(self):
        assert {tuple(e) for e in distinct_direction_union(2)} == {(1, 0), (0, 1), (1, 1)}

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_all_nonzero_binary_vectors(self, n):
        got = {tuple(e) for e in distinct_direction_union(n)}
        want = {t for t in itertools.product((0, 1), repeat=n) if any(t)}
        assert got == want and len(got) == 2 ** n - 1

    def test_matches_union_over_simplices(self):
        u = {tuple(d) for s in freudenthal_partition(3) for d in s.edges.directions}
        assert u == {tuple(e) for e in distinct_direction_union(3)}


class TestLatticeSpec:
    """Invariants of the shifted lattice and its enlarged domain."""

    def test_default_enlargement_valid(self):
        spec = LatticeSpec.create(Box.unit(3), 0.1, (0.5, 0.2, 0.9))
        need = spec.domain.dilate(0.1 * math.sqrt(3))
        assert spec.enlarged_domain.contains_box(need)

    @pytest.mark.parametrize("kw", [dict(h=0.0), dict(h=-1.0), dict(y=(1.0, 0.0)),
                                    dict(y=(-0.1, 0.0)), dict(y=(0.1,))])
    def test_invalid(self, kw):
        args = dict(h=0.25, y=(0.0, 0.0))
        args.update(kw)
        with pytest.raises(ValueError):
            LatticeSpec.create(Box.unit(2), args["h"], args["y"])

    def test_enlargement_too_small(self):
        with pytest.raises(ValueError):
            LatticeSpec.create(Box.unit(2), 0.25, enlargement=1.0)
        with pytest.raises(ValueError):
            LatticeSpec(0.25, (0, 0), Box.unit(2), Box.unit(2).dilate(0.25 * math.sqrt(2)))

    def test_active_cells_cover_cells_meeting_domain(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            spec = LatticeSpec.create(Box.unit(n), float(rng.uniform(0.02, 0.5)), rng.random(n))
            lo, hi = spec.cell_range()
            olo, ohi = spec.omega_cell_range()
            assert np.all(lo <= olo) and np.all(hi >= ohi)
            # closure of every active cell inside the enlarged box
            a = spec.cell_origin(lo)
            b = spec.cell_origin(hi + 1)
            assert spec.enlarged_domain.contains(np.stack([a, b]), 1e-9).all()


class TestEnumerateCells:
    """Cell streams, simplices per cell and canonical face keys."""

    def test_half_mesh_unit_square(self):
        spec = LatticeSpec.create(Box.unit(2), 0.5)
        cells = list(enumerate_cells(spec))
        idx = {c.index for c in cells}
        assert {(0, 0), (0, 1), (1, 0), (1, 1)} <= idx
        # ring of cells covering the closure of the enlarged box
        lo = spec.enlarged_domain.lo_array
        hi = spec.enlarged_domain.hi_array
        for c in cells:
            assert np.all(c.origin <= hi) and np.all(c.origin + 0.5 >= lo)
        assert len(idx) == len(cells) > 4

    def test_simplices_and_edges_per_cell(self):
        spec = LatticeSpec.create(Box.unit(3), 0.5, (0.3, 0.1, 0.7))
        for c in itertools.islice(enumerate_cells(spec, inside_only=True), 5):
            assert c.inside
            assert len(c.simplices) == 6
            assert len(c.edges) == 19
            assert len(c.faces) == 6

    def test_shared_face_key(self):
        assert face_key((2, 3), 0, 1) == face_key((3, 3), 0, 0)
        assert face_key((2, 3), 1, 1) == face_key((2, 4), 1, 0)
        assert face_key((2, 3), 0, 1) != face_key((2, 3), 1, 1)

    def test_cell_edge_counts(self):
        assert len(cell_edges(2)) == 5
        assert len(cell_edges(3)) == 19

    def test_coarse_mesh_warns(self):
        spec = LatticeSpec.create(Box.unit(2), 5.0)
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            assert list(enumerate_cells(spec)) == []
        assert any(issubclass(x.category, RuntimeWarning) for x in w)
