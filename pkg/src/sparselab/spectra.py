"""Singular values, hermitization, Stieltjes transforms and log potentials.

Dense kernels come from LAPACK through numpy and scipy.  The identities
tying them together (hermitization spectrum, log-determinant, negative
second moment) are checked against independent routes in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, DomainError, PreconditionError


def _matrix(B):
    M = np.asarray(getattr(B, "values", B))
    if M.ndim != 2:
        raise DimensionError("expected a matrix")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    return M


def singular_values(B):
    """All ``min(rows, cols)`` singular values, non-increasing."""
    M = _matrix(B)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def hermitize(Bz):
    """The Hermitian block matrix ``[[0, B], [B*, 0]]``."""
    M = _matrix(Bz)
    if M.shape[0] != M.shape[1]:
        raise DimensionError("hermitization needs a square matrix")
    n = M.shape[0]
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    H[:n, n:] = M
    H[n:, :n] = M.conj().T
    return H


def stieltjes(sv, w):
    """``(1/2n) sum_i [1/(s_i - w) + 1/(-s_i - w)]`` for ``Im w > 0``."""
    w = complex(w)
    if not w.imag > 0:
        raise DomainError("the Stieltjes transform needs Im w > 0")
    s = np.asarray(sv, dtype=float)
    if s.size == 0:
        raise PreconditionError("no singular values")
    return complex(np.sum(1.0 / (s - w) + 1.0 / (-s - w)) / (2 * s.size))


def stieltjes_resolvent(Bz, w):
    """``(1/2n) tr (H - w I)^-1`` through a dense linear solve."""
    H = hermitize(Bz)
    R = np.linalg.solve(H - complex(w) * np.eye(H.shape[0]), np.eye(H.shape[0]))
    return complex(np.trace(R) / H.shape[0])


@dataclass(frozen=True)
class LogPotential:
    """``(1/n) sum log s_j`` and its tails ``(1/n) sum_{|log s_j| > T} |log s_j|``.

    ``singular`` is set (and ``log_potential`` is ``-inf``) when some
    singular value is zero; tails are then taken over the nonzero ones.
    """

    log_potential: float
    tail_integrals: dict
    singular: bool
    zero_count: int
    singular_values: np.ndarray = field(repr=False)


def log_potential_report(Bz, T_marks=(), sv=None):
    M = _matrix(Bz)
    n = M.shape[0]
    s = singular_values(M) if sv is None else np.asarray(sv, dtype=float)
    zero = s == 0
    logs = np.log(s[~zero])
    lp = -math.inf if zero.any() else float(np.sum(logs) / n)
    tails = {}
    for T in T_marks:
        big = np.abs(logs) > T
        tails[float(T)] = float(np.sum(np.abs(logs[big])) / n)
    return LogPotential(lp, tails, bool(zero.any()), int(zero.sum()), s)


def log_abs_det(Bz):
    """``log |det B|`` from a complex LU factorisation (``-inf`` if singular)."""
    M = _matrix(Bz).astype(complex)
    sign, logdet = np.linalg.slogdet(M)
    return float(logdet) if sign != 0 else -math.inf


@dataclass(frozen=True)
class EsdMetrics:
    eigenvalues: np.ndarray
    radial_cdf: dict
    second_abs_moment: float


DISC_SECOND_MOMENT = 0.5


def disc_cdf(r):
    """Radial distribution function of the uniform law on the unit disc."""
    return min(max(float(r), 0.0), 1.0) ** 2


def esd_metrics(M, radii=()):
    """Eigenvalues, ``#{|lambda| <= r}/n`` per radius, and ``(1/n) sum |lambda|^2``."""
    A = _matrix(M)
    lam = np.linalg.eigvals(A)
    mod = np.abs(lam)
    n = lam.size
    cdf = {float(r): float(np.count_nonzero(mod <= r) / n) for r in radii}
    return EsdMetrics(lam, cdf, float(np.sum(mod**2) / n))


@dataclass(frozen=True)
class ColumnDistances:
    """Distances of columns to the span of the others, with unit normals.

    ``normals[:, j]`` is a unit vector orthogonal to every other column,
    ``inner[j] = <normal_j, col_j>`` and ``|inner[j]| = dist[j]``.
    ``negsec_relative`` is ``|sum s^-2 - sum dist^-2| / sum s^-2`` or
    ``None`` for singular input.
    """

    dist: np.ndarray
    normals: np.ndarray
    inner: np.ndarray
    negsec_relative: float | None
    sum_inv_sq_sv: float | None
    sum_inv_sq_dist: float | None


def column_distances(B, sv=None):
    M = _matrix(B).astype(complex)
    n = M.shape[1]
    if M.shape[0] != n:
        raise DimensionError("column distances need a square matrix")
    dist = np.zeros(n)
    normals = np.zeros((n, n), dtype=complex)
    inner = np.zeros(n, dtype=complex)
    for j in range(n):
        if n == 1:
            Qc = np.eye(1, dtype=complex)
        else:
            Qc, _ = np.linalg.qr(np.delete(M, j, axis=1), mode="complete")
        Q = Qc[:, : n - 1]
        col = M[:, j]
        resid = col - Q @ (Q.conj().T @ col)
        nr = np.linalg.norm(resid)
        dist[j] = nr
        # the last column of the complete factor is orthogonal to the other columns
        nu = resid / nr if nr > 0 else Qc[:, -1]
        normals[:, j] = nu
        inner[j] = np.vdot(nu, col)
    s = singular_values(M) if sv is None else np.asarray(sv, dtype=float)
    rel = a = b = None
    if np.all(s > 0) and np.all(dist > 0):
        a = float(np.sum(s**-2.0))
        b = float(np.sum(dist**-2.0))
        rel = abs(a - b) / a
    return ColumnDistances(dist, normals, inner, rel, a, b)


def random_unit_normals(B, rng):
    """For each column, a random unit vector in the orthogonal complement of the others.

    The vector depends only on the other columns (and ``rng``), so its inner
    product with the column is a genuine anticoncentration probe.  Returns
    the normals and the inner products ``<nu_j, col_j>``.
    """
    M = _matrix(B).astype(complex)
    n = M.shape[1]
    normals = np.zeros((M.shape[0], n), dtype=complex)
    inner = np.zeros(n, dtype=complex)
    for j in range(n):
        others = np.delete(M, j, axis=1)
        Q, R = np.linalg.qr(others, mode="complete")
        diag = np.abs(np.diagonal(R)) if R.size else np.zeros(0)
        tol = max(M.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
        rank = int(np.count_nonzero(diag > tol))
        kernel = Q[:, rank:]
        g = rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1])
        nu = kernel @ g
        nu /= np.linalg.norm(nu)
        normals[:, j] = nu
        inner[j] = np.vdot(nu, M[:, j])
    return normals, inner


# Levy-type row events


def max_set(x, r):
    """Indices of the ``floor(r)`` largest moduli of ``x`` (smallest index on ties)."""
    k = math.floor(r)
    a = np.abs(np.asarray(x).ravel())
    order = np.lexsort((np.arange(a.size), -a))
    return np.sort(order[:k])


@dataclass(frozen=True)
class RowEvent:
    """Per-row flags of the event and their count over rows outside ``Max_q(x)``.

    ``flags[i]`` is ``None`` for rows inside ``Max_q(x)``, which are not
    counted.  The three clauses are exposed separately.
    """

    S: int
    flags: list
    l1_ok: np.ndarray
    zero_ok: np.ndarray
    inner_ok: np.ndarray
    excluded: np.ndarray


def row_event_diagnostic(B, x, q, tau, C=4.0, p=None, alpha=None):
    """Count the rows ``i`` outside ``Max_q(x)`` where all three clauses hold.

    1. ``sum_j |b_ij| <= C pn``;
    2. ``b_ij = 0`` for ``j`` in ``Max_{q/2}(x)``;
    3. ``|sum_j b_ij x_j| >= x*_q / (2 alpha)``.

    ``q`` must lie in ``[ceil(tau/p), floor(1/p)]``.  ``p`` and ``alpha``
    default to those of the source sample of a shifted matrix.
    """
    M = _matrix(B)
    src = getattr(B, "source", None)
    p = p if p is not None else getattr(src, "p", None)
    alpha = alpha if alpha is not None else getattr(src, "alpha", None)
    if p is None or alpha is None:
        raise PreconditionError("p and alpha are needed for a plain array")
    n = M.shape[0]
    x = np.asarray(x).ravel()
    if x.size != M.shape[1]:
        raise DimensionError("vector length does not match the matrix")
    q = int(q)
    lo = math.ceil(tau / p)
    hi = math.floor(1.0 / p)
    if not lo <= q <= hi:
        raise PreconditionError(f"q = {q} outside [{lo}, {hi}]")
    if not 1 <= q <= x.size:
        raise PreconditionError(f"q = {q} outside [1, {x.size}]")
    pn = p * n
    absM = np.abs(M)
    l1_ok = absM.sum(axis=1) <= C * pn
    half = max_set(x, q / 2)
    zero_ok = ~np.any(M[:, half] != 0, axis=1) if half.size else np.ones(n, dtype=bool)
    xq = np.sort(np.abs(x))[::-1][q - 1]
    inner_ok = np.abs(M @ x) >= xq / (2 * alpha)
    excluded = np.zeros(n, dtype=bool)
    excluded[max_set(x, q)] = True
    event = l1_ok & zero_ok & inner_ok
    flags = [None if excluded[i] else bool(event[i]) for i in range(n)]
    S = int(np.count_nonzero(event & ~excluded))
    return RowEvent(S, flags, l1_ok, zero_ok, inner_ok, excluded)


# summary


@dataclass(frozen=True)
class SpectralReport:
    singular_values: np.ndarray
    eigenvalues: np.ndarray | None
    s_min: float
    log_potential: float
    tail_integrals: dict
    stieltjes_samples: dict


def spectral_report(Bz, T_marks=(), ws=(), eigenvalues=False):
    """Bundle of the spectral quantities of one shifted matrix."""
    M = _matrix(Bz)
    s = singular_values(M)
    lp = log_potential_report(M, T_marks, sv=s)
    st = {complex(w): stieltjes(s, w) for w in ws}
    lam = np.linalg.eigvals(M) if eigenvalues else None
    return SpectralReport(s, lam, float(s[-1]), lp.log_potential, lp.tail_integrals, st)


def schur_eigenvalues(M):
    """Eigenvalues through a complex Schur form (second route for cross-checks)."""
    T, _ = sla.schur(np.asarray(M, dtype=complex), output="complex")
    return np.diagonal(T).copy()
