import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparselab.errors import DomainError, PreconditionError
from sparselab.spectra import (
    DISC_SECOND_MOMENT,
    column_distances,
    disc_cdf,
    esd_metrics,
    hermitize,
    log_abs_det,
    log_potential_report,
    max_set,
    random_unit_normals,
    row_event_diagnostic,
    schur_eigenvalues,
    singular_values,
    spectral_report,
    stieltjes,
    stieltjes_resolvent,
)

seeds = st.integers(0, 2**32)


def gaussian(seed, n, complex_=True):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    if complex_:
        G = G + 1j * rng.standard_normal((n, n))
    return G / math.sqrt(n)


class TestSingularValues:
    def test_diagonal(self):
        assert np.allclose(singular_values(np.diag([3.0, -4.0])), [4, 3])

    def test_nilpotent(self):
        assert np.allclose(singular_values([[0.0, 1.0], [0.0, 0.0]]), [1, 0])

    def test_from_factors(self):
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        P, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        s = singular_values(Q @ np.diag([5.0, 4, 3, 2, 1]) @ P.T)
        assert np.allclose(s, [5, 4, 3, 2, 1], rtol=1e-10, atol=0)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            singular_values([[np.inf, 0.0], [0.0, 1.0]])

    @given(seeds, st.integers(1, 20))
    def test_sorted_and_trace(self, seed, n):
        B = gaussian(seed, n)
        s = singular_values(B)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
        hs = np.sum(np.abs(B) ** 2)
        assert abs(np.sum(s**2) - hs) <= 1e-8 * hs

    @given(seeds, st.integers(1, 12), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
    def test_scaling(self, seed, n, c):
        B = gaussian(seed, n)
        assert np.allclose(singular_values(c * B), abs(c) * singular_values(B), rtol=1e-12, atol=1e-12 * abs(c))


class TestHermitize:
    def test_scalar(self):
        H = hermitize([[3.0]])
        assert H.tolist() == [[0, 3], [3, 0]]
        assert np.allclose(np.linalg.eigvalsh(H), [-3, 3])

    def test_zero(self):
        assert not np.any(hermitize(np.zeros((3, 3))))

    def test_diagonal(self):
        assert np.allclose(np.linalg.eigvalsh(hermitize(np.diag([1.0, 2.0]))), [-2, -1, 1, 2])

    @given(seeds, st.integers(1, 30))
    def test_spectrum_is_plus_minus_singular_values(self, seed, n):
        B = gaussian(seed, n)
        H = hermitize(B)
        assert np.array_equal(H, H.conj().T)
        s = singular_values(B)
        assert np.allclose(np.linalg.eigvalsh(H), np.sort(np.concatenate([s, -s])), atol=1e-9)


class TestStieltjes:
    def test_single_value(self):
        assert abs(stieltjes([1.0], 1j) - 0.5j) < 1e-15

    def test_point_mass(self):
        assert abs(stieltjes(np.zeros(5), 0.25j) - 4j) < 1e-12

    def test_lower_half_plane(self):
        with pytest.raises(DomainError):
            stieltjes([1.0], 1.0)

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=10),
           st.floats(-5, 5), st.floats(1e-3, 10))
    def test_herglotz(self, sv, re, im):
        m = stieltjes(sv, complex(re, im))
        assert m.imag > 0
        imag_closed = sum(im / abs(s - complex(re, im)) ** 2 + im / abs(-s - complex(re, im)) ** 2 for s in sv)
        assert math.isclose(m.imag, imag_closed / (2 * len(sv)), rel_tol=1e-9)

    @given(seeds, st.integers(1, 24), st.floats(-2, 2), st.floats(0.05, 3))
    def test_matches_resolvent(self, seed, n, re, im):
        B = gaussian(seed, n)
        w = complex(re, im)
        assert abs(stieltjes(singular_values(B), w) - stieltjes_resolvent(B, w)) <= 1e-9


class TestLogPotential:
    def test_scaled_identity(self):
        rep = log_potential_report(2 * np.eye(2), [1.0])
        assert math.isclose(rep.log_potential, math.log(2))
        assert rep.tail_integrals[1.0] == 0

    def test_singular(self):
        rep = log_potential_report(np.array([[1.0, 0], [0, 0]]), [0.5])
        assert rep.singular and rep.log_potential == -math.inf and rep.zero_count == 1

    def test_gaussian_determinant(self):
        B = gaussian(10, 10, complex_=False)
        n = 10
        assert abs(log_abs_det(B) / n - log_potential_report(B).log_potential) <= 1e-9

    @given(seeds, st.integers(1, 40), st.complex_numbers(max_magnitude=1.5))
    def test_girko_identity(self, seed, n, z):
        Bz = gaussian(seed, n) - z * np.eye(n)
        lp = log_potential_report(Bz).log_potential
        assert abs(log_abs_det(Bz) / n - lp) <= 1e-9

    def test_tails(self):
        rep = log_potential_report(np.diag([math.e**3, 1.0, math.e**-2]), [1.0, 2.5])
        assert math.isclose(rep.tail_integrals[1.0], 5 / 3)
        assert math.isclose(rep.tail_integrals[2.5], 1.0)


class TestEsd:
    def test_identity(self):
        e = esd_metrics(np.eye(4), [0.5, 1.0])
        assert e.radial_cdf == {0.5: 0.0, 1.0: 1.0}
        assert math.isclose(e.second_abs_moment, 1.0)

    def test_diagonal(self):
        e = esd_metrics(np.diag([0.5, 0.5j]), [0.6])
        assert e.radial_cdf[0.6] == 1.0 and math.isclose(e.second_abs_moment, 0.25)

    def test_disc_reference(self):
        assert disc_cdf(0.5) == 0.25 and disc_cdf(2.0) == 1.0 and disc_cdf(-1) == 0.0
        assert DISC_SECOND_MOMENT == 0.5

    @given(seeds, st.integers(1, 20))
    def test_two_eigen_routes(self, seed, n):
        M = gaussian(seed, n)
        a = np.sort_complex(np.round(esd_metrics(M).eigenvalues, 8))
        b = np.sort_complex(np.round(schur_eigenvalues(M), 8))
        assert np.allclose(np.sort(np.abs(a)), np.sort(np.abs(b)), atol=1e-8)
        assert math.isclose(np.sum(a).real, np.trace(M).real, abs_tol=1e-6)


class TestColumnDistances:
    def test_scalar(self):
        cd = column_distances([[2.0]])
        assert cd.dist.tolist() == [2.0] and cd.sum_inv_sq_sv == 0.25 and cd.sum_inv_sq_dist == 0.25

    def test_diagonal(self):
        cd = column_distances(np.diag([1.0, 2.0]))
        assert np.allclose(cd.dist, [1, 2])
        assert math.isclose(cd.sum_inv_sq_sv, 1.25) and math.isclose(cd.sum_inv_sq_dist, 1.25)

    @given(seeds, st.integers(1, 16))
    def test_negative_second_moment(self, seed, n):
        B = gaussian(seed, n)
        s = singular_values(B)
        if s[0] / s[-1] > 1e4:
            return
        cd = column_distances(B)
        assert cd.negsec_relative <= 1e-8
        assert np.allclose(np.abs(cd.inner), cd.dist, atol=1e-9)
        others = [np.delete(B, j, axis=1) for j in range(n)]
        for j in range(n):
            assert np.allclose(cd.normals[:, j].conj() @ others[j], 0, atol=1e-9)

    def test_random_normals(self):
        B = gaussian(3, 6)
        nu, inner = random_unit_normals(B, np.random.default_rng(0))
        cd = column_distances(B)
        assert np.allclose(np.linalg.norm(nu, axis=0), 1)
        assert np.allclose(np.abs(inner), cd.dist, atol=1e-9)


class TestRowEvent:
    def test_empty_half_set(self):
        assert max_set([1.0, 0, 0], 0.5).size == 0
        ev = row_event_diagnostic(np.eye(3), [1.0, 0, 0], 1, 1.0, p=1.0, alpha=1.0)
        assert ev.zero_ok.all()

    def test_identity(self):
        x = np.zeros(4)
        x[:2] = 1 / math.sqrt(2)
        ev = row_event_diagnostic(np.eye(4), x, 2, 1.0, p=0.5, alpha=1.0)
        assert ev.flags[:2] == [None, None]
        assert not ev.inner_ok[2:].any() and ev.S == 0

    def test_zero_matrix(self):
        assert row_event_diagnostic(np.zeros((4, 4)), np.ones(4) / 2, 2, 1.0, p=0.5, alpha=1.0).S == 0

    def test_q_range(self):
        with pytest.raises(PreconditionError):
            row_event_diagnostic(np.eye(4), np.ones(4) / 2, 3, 1.0, p=0.5, alpha=1.0)

    def test_ties_smallest_index(self):
        assert max_set([1.0, 2.0, 2.0, 1.0], 2).tolist() == [1, 2]
        assert max_set([1.0, 1.0, 1.0], 2).tolist() == [0, 1]


def test_spectral_report():
    B = np.diag([3.0, 1.0])
    rep = spectral_report(B, T_marks=[0.5], ws=[1j], eigenvalues=True)
    assert rep.s_min == 1.0 and math.isclose(rep.log_potential, math.log(3) / 2)
    assert set(np.round(rep.eigenvalues.real, 12)) == {1.0, 3.0}
    assert abs(rep.stieltjes_samples[1j] - stieltjes([3.0, 1.0], 1j)) < 1e-15
