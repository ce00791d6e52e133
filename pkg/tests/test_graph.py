import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sparselab.errors import DimensionError
from sparselab.graph import (
    BipartiteDigraph,
    build_graph,
    degree_tail_report,
    expansion_check,
    expansion_check_exhaustive,
    l1_tail_report,
    neighbors,
    overlap,
    remove_right,
)

cells = st.sampled_from([0.0, 0.0, 0.3, -0.5, 1.0, -2.0, 3.0])


def small_matrix(max_n=6, square=True):
    if square:
        return st.integers(1, max_n).flatmap(lambda n: arrays(float, (n, n), elements=cells))
    return st.tuples(st.integers(1, max_n), st.integers(1, max_n)).flatmap(
        lambda s: arrays(float, s, elements=cells))


def lists(xs):
    return [a.tolist() for a in xs]


class TestBuildGraph:
    def test_identity(self):
        G = build_graph(np.eye(3), 1.0)
        assert lists(G.arrow_in) == [[0], [1], [2]]
        assert lists(G.arrow_out) == [[0], [1], [2]]
        assert G.has_horizontal

    def test_small_entry_is_not_large(self):
        G = build_graph(np.array([[1, 0], [0.5, 1]]), 1.0)
        assert lists(G.arrow_in) == [[0, 1], [1]]
        assert lists(G.arrow_out) == [[0], [1]]

    def test_zero_matrix(self):
        G = build_graph(np.zeros((3, 3)), 1.0)
        assert G.arrow.nnz == 0 and G.large.nnz == 0 and not G.has_horizontal

    def test_non_square(self):
        with pytest.raises(DimensionError):
            build_graph(np.ones((2, 3)), 1.0)
        assert build_graph(np.ones((2, 3)), 1.0, rectangular=True).n_right == 3

    def test_accepts_shifted_matrix(self):
        from sparselab.sampling import EntryDistribution, sample_matrix, shift_and_scale
        A = sample_matrix(5, 0.5, 2.0, EntryDistribution.rademacher(), 1)
        G = build_graph(shift_and_scale(A, 1j), 2.0)
        assert G.has_horizontal

    @given(small_matrix(square=False), st.sampled_from([1.0, 2.0, 4.0]))
    def test_edges_match_definition(self, B, alpha):
        G = build_graph(B, alpha, rectangular=True)
        arrows, larges = G.edge_sets()
        assert arrows == {(i, j) for i, j in zip(*np.nonzero(B))}
        assert larges == {(i, j) for i, j in zip(*np.nonzero(np.abs(B) >= 1 / alpha))}
        assert larges <= arrows

    @given(small_matrix(square=False))
    def test_left_views_transpose_right_views(self, B):
        G = build_graph(B, 2.0, rectangular=True)
        from_right = {(i, j) for j, ins in enumerate(G.arrow_in) for i in ins.tolist()}
        from_left = {(i, j) for i, outs in enumerate(G.left_out) for j in outs.tolist()}
        assert from_right == from_left
        big_right = {(i, j) for j, outs in enumerate(G.arrow_out) for i in outs.tolist()}
        big_left = {(i, j) for i, ins in enumerate(G.left_in) for j in ins.tolist()}
        assert big_right == big_left

    @given(small_matrix(square=False))
    def test_transpose_duality(self, B):
        G = build_graph(B, 2.0, rectangular=True)
        H = build_graph(B.T, 2.0, rectangular=True)
        a, b = G.edge_sets()
        at, bt = H.edge_sets()
        assert at == {(j, i) for i, j in a} and bt == {(j, i) for i, j in b}

    @given(small_matrix(square=False), st.floats(1, 4), st.floats(1, 4))
    def test_alpha_monotonicity(self, B, a1, a2):
        lo, hi = sorted((a1, a2))
        G1 = build_graph(B, lo, rectangular=True)
        G2 = build_graph(B, hi, rectangular=True)
        assert G1.edge_sets()[0] == G2.edge_sets()[0]
        assert G1.edge_sets()[1] <= G2.edge_sets()[1]

    def test_from_edges_requires_subset(self):
        with pytest.raises(Exception):
            BipartiteDigraph.from_edges(2, 2, [(0, 0)], [(1, 1)])


class TestNeighbors:
    def test_empty(self):
        assert neighbors(build_graph(np.eye(3), 1.0), "right", "in", []).size == 0

    def test_identity(self):
        assert neighbors(build_graph(np.eye(3), 1.0), "right", "in", [0, 1]).tolist() == [0, 1]

    def test_upper_triangular(self):
        G = build_graph(np.array([[1.0, 1.0], [0.0, 1.0]]), 1.0)
        assert neighbors(G, "right", "in", [1]).tolist() == [0, 1]
        assert neighbors(G, "left", "out", [0]).tolist() == [0, 1]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            neighbors(build_graph(np.eye(2), 1.0), "right", "in", [5])

    @given(small_matrix(), st.data())
    def test_union_identity(self, B, data):
        G = build_graph(B, 1.0)
        n = B.shape[0]
        I = data.draw(st.sets(st.integers(0, n - 1)))
        for side, direction in itertools.product(("left", "right"), ("in", "out")):
            whole = set(neighbors(G, side, direction, I).tolist())
            parts = set()
            for v in I:
                parts |= set(neighbors(G, side, direction, [v]).tolist())
            assert whole == parts


class TestExpansion:
    def test_disjoint_columns_hold(self):
        assert expansion_check(build_graph(np.eye(6), 1.0), 0.01, 1.0, 3).holds

    def test_shared_column_deficit(self):
        G = BipartiteDigraph.from_edges(3, 2, [(i, j) for i in range(3) for j in range(2)])
        rep = expansion_check(G, 1.0, 1.0, 3)
        assert not rep.holds
        assert rep.worst_violations == [((0, 1), 1.0)]

    def test_sampled_flag(self):
        G = build_graph(np.eye(8), 1.0)
        assert not expansion_check(G, 0.1, 1.0, 3).sampled
        assert expansion_check(G, 0.1, 1.0, 5).sampled

    @given(small_matrix(max_n=7), st.sampled_from([0.0, 0.2, 0.5]))
    def test_small_sizes_match_brute_force(self, B, eps):
        G = build_graph(B, 1.0)
        m = G.n_right
        brute = any(
            overlap(G, I) - eps * 2.0 * len(I) > 0
            for k in (2, 3) for I in itertools.combinations(range(m), k)
        )
        rep = expansion_check(G, eps, 2.0, 3)
        assert rep.holds == (not brute)
        ex = expansion_check_exhaustive(G, eps, 2.0, max_size=3)
        assert ex.holds == rep.holds

    @given(small_matrix(max_n=6), st.sampled_from([0.0, 0.3]))
    def test_exhaustive_matches_brute_force(self, B, eps):
        G = build_graph(B, 1.0)
        m = G.n_right
        brute = any(
            overlap(G, I) - eps * len(I) > 0
            for k in range(2, m + 1) for I in itertools.combinations(range(m), k)
        )
        assert expansion_check_exhaustive(G, eps, 1.0).holds == (not brute)


class TestDegreeTails:
    def test_identity(self):
        rep = degree_tail_report(build_graph(np.eye(10), 1.0), 1.0)
        assert not rep.left_counts.any() and not rep.right_counts.any()

    def test_star(self):
        B = np.zeros((4, 4))
        B[:, 0] = 1.0
        rep = degree_tail_report(build_graph(B, 1.0), 1.0)
        assert rep.right_counts[0] == 1

    def test_empty(self):
        rep = degree_tail_report(build_graph(np.zeros((4, 4)), 1.0), 1.0)
        assert not rep.left_counts.any() and not rep.right_counts.any()

    @given(small_matrix(max_n=8))
    def test_constant_bounds_counts(self, B):
        G = build_graph(B, 1.0)
        pn = 1.0
        rep = degree_tail_report(G, pn)
        n = G.n_left
        for u, c in enumerate(rep.left_counts):
            assert c <= n * math.exp(-rep.constant * (pn + u)) * (1 + 1e-9)

    @given(small_matrix(max_n=8), st.data())
    def test_union_of_supports(self, B, data):
        G = build_graph(B, 1.0)
        pn = 1.0
        rep = degree_tail_report(G, pn)
        if rep.union_constant is None:
            return
        n = G.n_right
        M = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
        total = sum(G.in_degree[j] for j in M)
        assert total <= rep.union_constant * (pn + math.log(n / len(M))) * len(M) + 1e-9


class TestL1Tails:
    def test_zero(self):
        rep = l1_tail_report(np.zeros((3, 3)), 1.0)
        assert not rep.row_counts.any() and rep.all_hold

    def test_all_ones(self):
        rep = l1_tail_report(np.ones((4, 4)), 4.0)
        assert rep.r_values[0] == 4.0 and rep.row_counts[0] == 0

    def test_single_heavy_row(self):
        B = np.zeros((10, 10))
        B[0, 0] = 100.0
        rep = l1_tail_report(B, 1.0, r_values=[10.0])
        assert rep.row_counts[0] == 1
        assert rep.limits[0] == pytest.approx(10 / 10**0.9)
        assert rep.holds[0]

    def test_default_grid(self):
        B = np.zeros((10, 10))
        B[0, 0] = 100.0
        rep = l1_tail_report(B, 1.0)
        assert rep.r_values.tolist() == [2.0**t for t in range(8)]


def test_remove_right_keeps_labels():
    G = build_graph(np.eye(4), 1.0)
    H = remove_right(G, [1, 2])
    assert H.right_labels.tolist() == [0, 3]
    assert H.n_right == 2
