import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparselab.errors import DimensionError, PreconditionError
from sparselab.graph import build_graph
from sparselab.shells import (
    Shell,
    build_shell_from_vector,
    growth_bounds,
    minimal_layer_sizes,
    order_stat_profile,
    shell_growth_check,
    validate_shell,
)
from sparselab.types_chains import classify_types


def null_instance(seed, n_max=24):
    """Sparse matrix with an exact null vector: one entry per row is solved for."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    B = np.where(rng.random((n, n)) < 0.3, rng.uniform(0.2, 3.0, (n, n)) * rng.choice([-1, 1], (n, n)), 0.0)
    x = np.exp(-rng.uniform(0, 5, n)) * rng.choice([-1, 1], n)
    for i in range(n):
        supp = np.nonzero(B[i])[0]
        if supp.size:
            c = supp[np.argmax(np.abs(x[supp]))]
            B[i, c] = -(B[i] @ x - B[i, c] * x[c]) / x[c]
    M = [int(i) for i in rng.choice(n, size=int(rng.integers(0, 3)), replace=False)]
    J = [int(j) for j in rng.choice(n, size=int(rng.integers(1, 4)), replace=False)]
    return B, x, M, J, int(rng.integers(1, 4)), float(rng.choice([1.0, 2.0]))


class TestBuild:
    def test_identity_example(self):
        out = build_shell_from_vector(np.eye(2), [1.0, 0.0], [0], [0], 1, 1.0)
        assert out.ok and out.L == 1.0
        assert out.shell.layers == (frozenset({0}), frozenset())
        assert validate_shell(out.shell, build_graph(np.eye(2), 1.0)).valid

    def test_vanishing_on_center(self):
        with pytest.raises(PreconditionError):
            build_shell_from_vector(np.eye(2), [0.0, 1.0], [], [0], 1, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            build_shell_from_vector(np.eye(2), [1.0, 0.0, 0.0], [], [0], 1, 1.0)

    def test_hypothesis_failure(self):
        out = build_shell_from_vector(np.array([[1.0, 1.0], [0.0, 1.0]]), [1.0, 1.0], [], [0], 1, 1.0)
        assert out.failure == "hypothesis" and out.row == 0

    def test_witness_layer(self):
        B = np.array([[1.0, -1.0, 0.0], [0, 0, 0], [0, 0, 0]])
        out = build_shell_from_vector(B, [1.0, 1.0, 0.0], [], [0], 1, 1.0)
        assert out.shell.layers == (frozenset({0}), frozenset({1}))
        assert out.shell.witness == {(0, 0, 0): 1}

    @given(st.integers(0, 2**32))
    def test_valid_and_decaying(self, seed):
        B, x, M, J, d, alpha = null_instance(seed)
        out = build_shell_from_vector(B, x, M, J, d, alpha)
        if not out.ok:
            assert out.failure == "hypothesis"
            return
        S = out.shell
        assert validate_shell(S, build_graph(B, alpha)).valid
        grow = 2 * alpha * out.L
        for q, layer in enumerate(S.layers):
            if layer:
                assert order_stat_profile(x, [len(layer)])[0] >= out.base / grow**q

    @given(st.integers(0, 2**32))
    def test_permutation_equivariance(self, seed):
        B, x, M, J, d, alpha = null_instance(seed, 12)
        perm = np.random.default_rng(seed + 1).permutation(x.size)
        inv = np.argsort(perm)
        a = build_shell_from_vector(B, x, M, J, d, alpha)
        b = build_shell_from_vector(B[:, perm], x[perm], M, [int(inv[j]) for j in J], d, alpha)
        assert a.failure == b.failure
        if a.ok:
            assert b.shell.layers == tuple(frozenset(int(inv[j]) for j in c) for c in a.shell.layers)


class TestValidate:
    def test_center_only(self):
        G = build_graph(np.eye(3), 1.0)
        assert validate_shell(Shell(frozenset(), (frozenset({0}),)), G).valid

    def test_deleted_witness(self):
        B = np.array([[1.0, -1.0, 0.0], [0, 0, 0], [0, 0, 0]])
        G = build_graph(B, 1.0)
        S = build_shell_from_vector(B, [1.0, 1.0, 0.0], [], [0], 1, 1.0).shell
        broken = Shell(S.M, (S.layers[0], S.layers[1] - {1}))
        res = validate_shell(broken, G)
        assert not res.valid and res.violations == [(0, 0, 0)]


class TestGrowth:
    def test_bound_arithmetic(self):
        assert growth_bounds(64, 0.5, 1 / 64, 1, 3) == [1, 2, 4, 8]
        assert growth_bounds(16, 0.5, 1 / 64, 1, 3) == [1, 2, 2, 2]

    def test_center_too_large(self):
        G = build_graph(np.eye(4), 1.0)
        P = classify_types(G, 0.5)
        S = Shell(frozenset(), (frozenset({0, 1, 2}),))
        v = shell_growth_check(S, G, P, 0.5, 0.01, 0.5, [0, 1, 2])
        assert v.status == "hypothesis-not-met"
        assert "center too large" in v.failed_hypotheses


def brute_min_sizes(B, alpha, M, J, depth):
    """Smallest layer sizes over every sequence of column subsets forming a shell."""
    m = B.shape[1]
    large = np.abs(B) >= 1 / alpha
    nz = B != 0
    subsets = [frozenset(c) for r in range(m + 1) for c in itertools.combinations(range(m), r)]

    def ok(cur, nxt):
        for j in cur:
            for i in np.nonzero(large[:, j])[0]:
                if i not in M and not any(nz[i, h] for h in nxt if h != j):
                    return False
        return True

    best = [len(J)] + [None] * depth
    layers = [frozenset(J)]
    for level in range(1, depth + 1):
        reach = {nxt for cur in layers for nxt in subsets if ok(cur, nxt)}
        if not reach:
            return None
        best[level] = min(len(c) for c in reach)
        layers = list(reach)
    return best


@pytest.mark.parametrize("seed", range(6))
def test_minimal_sizes_exhaustive(seed):
    rng = np.random.default_rng(seed)
    B = np.where(rng.random((8, 8)) < 0.3, rng.choice([0.5, 2.0], (8, 8)), 0.0)
    np.fill_diagonal(B, 2.0)
    M = {0} if seed % 2 else set()
    assert minimal_layer_sizes(build_graph(B, 1.0), M, [1], 2) == brute_min_sizes(B, 1.0, M, [1], 2)


class TestProfile:
    def test_sorted(self):
        assert order_stat_profile([3, -1, 2], [1, 2, 3]) == [3, 2, 1]

    def test_zero(self):
        assert order_stat_profile(np.zeros(4), [1, 4]) == [0, 0]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            order_stat_profile([1.0, 2.0], [3])

    @given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False), min_size=1, max_size=20), st.randoms())
    def test_permutation_invariance(self, x, rnd):
        y = list(x)
        rnd.shuffle(y)
        marks = list(range(1, len(x) + 1))
        assert order_stat_profile(x, marks) == order_stat_profile(y, marks)
