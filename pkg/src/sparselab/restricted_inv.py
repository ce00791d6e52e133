"""Randomised restricted invertibility and the projection-distance check.

Given ``V`` with orthonormal rows (``k x n``), a random column subset ``J``
of size ``ell = floor(c_tilde eta^3 rho^2 k)`` is accepted when every chosen
column is short and the chosen columns are uniformly well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParameters, DimensionError, PreconditionError
from .sampling import derive_trial_seed

DEFAULTS = {"c_tilde": 0.01, "c_hat": 0.1, "C_cap": 16.0, "c_low": 0.05}
ORTHO_TOL = 1e-10
# relative slack for the lower singular bound, so exact equality survives rounding
LOWER_RTOL = 1e-12


def wilson_interval(successes, trials, z=1.959963984540054):
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials <= 0:
        return (0.0, 1.0)
    ph = successes / trials
    denom = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def _haar_unitary(k, rng):
    G = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / math.sqrt(2)
    Q, R = np.linalg.qr(G)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def orthonormal_basis(E, tol=1e-12):
    """Orthonormal columns spanning the column space of ``E``."""
    E = np.atleast_2d(np.asarray(E, dtype=complex))
    U, s, _ = np.linalg.svd(E, full_matrices=False)
    rank = int(np.count_nonzero(s > tol * max(E.shape) * (s[0] if s.size else 0.0)))
    return U[:, :rank]


def order_stat(v, s):
    """``v*_s``: the s-th largest modulus (1-based)."""
    a = np.sort(np.abs(v))[::-1]
    return float(a[s - 1]) if 1 <= s <= a.size else 0.0


@dataclass(frozen=True)
class SpreadBasisResult:
    basis: np.ndarray | None
    attempts: int
    success: bool


def spread_basis(E, s, max_attempts=32, seed=0):
    """A Haar-random orthonormal basis of ``span(E)`` whose vectors are all spread.

    Each vector ``u`` must satisfy ``u*_s >= 1/(2 sqrt(n))``.  Up to
    ``max_attempts`` bases are drawn; failure is reported, not raised.
    """
    Q = orthonormal_basis(E)
    n, k = Q.shape
    s = int(s)
    if k == 0:
        raise PreconditionError("the subspace is trivial")
    if not 1 <= s <= n:
        raise PreconditionError(f"s must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    need = 1.0 / (2.0 * math.sqrt(n))
    for attempt in range(1, max_attempts + 1):
        U = Q @ _haar_unitary(k, rng)
        if all(order_stat(U[:, j], s) >= need for j in range(k)):
            return SpreadBasisResult(U, attempt, True)
    return SpreadBasisResult(None, max_attempts, False)


def bt_ell(k, eta, rho, c_tilde=DEFAULTS["c_tilde"]):
    """``floor(c_tilde eta^3 rho^2 k)``."""
    return math.floor(c_tilde * eta**3 * rho**2 * k)


def rows_orthonormal(V, tol=ORTHO_TOL):
    V = np.asarray(V)
    return bool(np.max(np.abs(V @ V.conj().T - np.eye(V.shape[0])), initial=0.0) <= tol)


def spread_ok(V, eta, rho):
    """Whether every row has ``row*_{floor(eta n)} >= rho / sqrt(n)``."""
    V = np.asarray(V)
    n = V.shape[1]
    r = math.floor(eta * n)
    if r < 1:
        return True
    return all(order_stat(row, r) >= rho / math.sqrt(n) for row in V)


@dataclass(frozen=True)
class BTSubset:
    J: np.ndarray
    ell: int
    spread_ok: bool


def sample_bt_subset(V, eta, rho, seed, mode="uniform", c_tilde=DEFAULTS["c_tilde"]):
    """Random column subset for the restricted-invertibility trial.

    ``mode`` is ``"bernoulli"`` (each column with probability ``ell/n``) or
    ``"uniform"`` (uniform among subsets of size ``ell``).  ``ell`` is capped
    at ``n``; ``ell = 0`` raises :class:`DegenerateParameters`.
    """
    V = np.asarray(V)
    k, n = V.shape
    if not rows_orthonormal(V):
        raise PreconditionError("rows of V are not orthonormal")
    ell = min(bt_ell(k, eta, rho, c_tilde), n)
    if ell < 1:
        raise DegenerateParameters("ell = floor(c_tilde eta^3 rho^2 k) is zero")
    rng = np.random.default_rng(seed)
    if mode == "bernoulli":
        J = np.nonzero(rng.random(n) < ell / n)[0]
    elif mode == "uniform":
        J = np.sort(rng.choice(n, size=ell, replace=False))
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    return BTSubset(J.astype(np.int64), ell, spread_ok(V, eta, rho))


@dataclass(frozen=True)
class BTSample:
    """One restricted-invertibility trial and its verdicts.

    ``submatrix_smin`` is the smallest singular value of the ``k x |J|``
    column submatrix (0 when ``|J| > k``, ``inf`` for empty ``J``).
    """

    eta: float
    rho: float
    k: int
    n: int
    ell: int
    J: np.ndarray
    cond_norm: bool
    cond_lower: bool
    submatrix_smin: float
    lower_threshold: float
    norm_threshold: float

    @property
    def success(self):
        return len(self.J) == self.ell and self.cond_norm and self.cond_lower


def submatrix_smin(V, J):
    V = np.asarray(V)
    J = np.asarray(J, dtype=np.int64)
    if J.size == 0:
        return math.inf
    if J.size > V.shape[0]:
        return 0.0
    return float(np.linalg.svd(V[:, J], compute_uv=False)[-1])


def check_bt_conditions(V, J, eta, rho, C_cap=DEFAULTS["C_cap"], c_low=DEFAULTS["c_low"], ell=None):
    """Column-norm cap and lower singular bound on the chosen columns."""
    V = np.asarray(V)
    k, n = V.shape
    J = np.asarray(sorted(set(int(j) for j in J)), dtype=np.int64)
    if J.size and (J[0] < 0 or J[-1] >= n):
        raise IndexError("column index out of range")
    norm_thr = math.sqrt(C_cap * k / (eta * n))
    cond_norm = bool(np.all(np.linalg.norm(V[:, J], axis=0) <= norm_thr)) if J.size else True
    smin = submatrix_smin(V, J)
    lower = c_low * rho * math.sqrt(eta * k / n)
    return BTSample(
        eta=float(eta),
        rho=float(rho),
        k=k,
        n=n,
        ell=len(J) if ell is None else int(ell),
        J=J,
        cond_norm=cond_norm,
        cond_lower=bool(smin >= lower * (1.0 - LOWER_RTOL)),
        submatrix_smin=smin,
        lower_threshold=lower,
        norm_threshold=norm_thr,
    )


@dataclass(frozen=True)
class BTRate:
    rate: float
    interval: tuple
    lower_ref: float
    successes: int
    trials: int
    samples: list


def bt_trial(V, eta, rho, seed, mode="uniform", c_tilde=DEFAULTS["c_tilde"],
             C_cap=DEFAULTS["C_cap"], c_low=DEFAULTS["c_low"]):
    sub = sample_bt_subset(V, eta, rho, seed, mode, c_tilde)
    return check_bt_conditions(V, sub.J, eta, rho, C_cap, c_low, ell=sub.ell)


def bt_success_rate(V, eta, rho, trials, seed, mode="uniform", c_tilde=DEFAULTS["c_tilde"],
                    c_hat=DEFAULTS["c_hat"], C_cap=DEFAULTS["C_cap"], c_low=DEFAULTS["c_low"]):
    """Monte Carlo success frequency with a Wilson interval and ``(c_hat eta)^ell``."""
    trials = int(trials)
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    samples = [
        bt_trial(V, eta, rho, derive_trial_seed(seed, t, "bt"), mode, c_tilde, C_cap, c_low)
        for t in range(trials)
    ]
    wins = sum(s.success for s in samples)
    ell = samples[0].ell
    return BTRate(wins / trials, wilson_interval(wins, trials), (c_hat * eta) ** ell,
                  wins, trials, samples)


def partial_fourier(k, n, offset=0):
    """Rows ``exp(2 pi i f t / n) / sqrt(n)`` for frequencies ``offset..offset+k-1``."""
    t = np.arange(n)
    f = np.arange(offset, offset + k)[:, None]
    return np.exp(2j * np.pi * f * t / n) / math.sqrt(n)


# projection distances


@dataclass(frozen=True)
class ProjectionVerdict:
    """Outcome of :func:`projection_bound_check`.

    ``status`` is ``"pass"``, ``"fail"`` or ``"hypothesis-not-met"``.
    ``distances[t]`` is the norm of the projected ``J[t]``-th column.
    """

    status: str
    failed_hypotheses: list
    count: int
    ell: int
    threshold: float
    distances: np.ndarray


def complement_projector(B, J, rtol=None):
    """Orthogonal projector onto the complement of the span of the columns outside ``J``."""
    B = np.asarray(B, dtype=complex)
    n = B.shape[1]
    rest = np.setdiff1d(np.arange(n), J)
    if rest.size == 0:
        return np.eye(B.shape[0], dtype=complex)
    U, s, _ = np.linalg.svd(B[:, rest], full_matrices=False)
    if rtol is None:
        rtol = max(B.shape) * np.finfo(float).eps
    rank = int(np.count_nonzero(s > rtol * (s[0] if s.size else 0.0)))
    U = U[:, :rank]
    return np.eye(B.shape[0], dtype=complex) - U @ U.conj().T


def projection_bound_check(B, V, J, eta, rho, s, C_cap=DEFAULTS["C_cap"], c_low=DEFAULTS["c_low"]):
    """Count columns ``j`` in ``J`` with ``||P_J col_j(B)|| <= sqrt(2)/(c_low rho) sqrt(n/(eta k)) s``.

    Hypotheses checked first: ``V`` has orthonormal, spread rows,
    ``||B V^T|| <= s``, and ``J`` passes both restricted-invertibility
    conditions.  When they hold the count must be at least ``|J|/2``.
    """
    B = np.asarray(B)
    V = np.asarray(V)
    k, n = V.shape
    if B.shape != (n, n):
        raise DimensionError("B must be n x n with n the number of columns of V")
    J = np.asarray(sorted(set(int(j) for j in J)), dtype=np.int64)
    failed = []
    if not rows_orthonormal(V):
        failed.append("rows not orthonormal")
    if not spread_ok(V, eta, rho):
        failed.append("rows not spread")
    if J.size == 0:
        failed.append("empty J")
    op = float(np.linalg.norm(B @ V.T, 2)) if B.size else 0.0
    if op > s:
        failed.append("operator norm above s")
    bt = check_bt_conditions(V, J, eta, rho, C_cap, c_low)
    if not bt.cond_norm:
        failed.append("column norm condition")
    if not bt.cond_lower:
        failed.append("lower singular condition")
    thr = math.sqrt(2.0) / (c_low * rho) * math.sqrt(n / (eta * k)) * s
    P = complement_projector(B, J)
    dists = np.linalg.norm(P @ B[:, J].astype(complex), axis=0) if J.size else np.zeros(0)
    count = int(np.count_nonzero(dists <= thr))
    if failed:
        return ProjectionVerdict("hypothesis-not-met", failed, count, int(J.size), thr, dists)
    status = "pass" if count >= J.size / 2 else "fail"
    return ProjectionVerdict(status, [], count, int(J.size), thr, dists)
