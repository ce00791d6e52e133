"""M-shells: layered column sets built from almost-null vectors.

A sequence of column sets ``C_0, ..., C_d`` is an M-shell when every large
entry ``|b_ij| >= 1/alpha`` of a layer ``C_l`` (``l < d``) in a row outside
``M`` is matched by another nonzero of that row inside ``C_{l+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PreconditionError
from .graph import expansion_check, expansion_check_exhaustive


@dataclass(frozen=True)
class Shell:
    """Layers ``C_0..C_d`` (frozensets of columns) with the rows ``M`` exempted.

    ``witness`` maps ``(q, i, j)`` to the column of ``C_{q+1}`` chosen for the
    large entry ``(i, j)`` with ``j`` in ``C_q``.
    """

    M: frozenset
    layers: tuple
    witness: dict = field(default_factory=dict, compare=False)

    @property
    def depth(self):
        return len(self.layers) - 1

    @property
    def center(self):
        return self.layers[0]

    def sizes(self):
        return [len(c) for c in self.layers]


@dataclass(frozen=True)
class ShellOutcome:
    """Result of :func:`build_shell_from_vector`.

    On success ``shell`` is set.  Otherwise ``failure`` names the reason
    (``"hypothesis"`` with the offending ``row``, or ``"numerical"``).
    """

    shell: Shell | None
    failure: str | None
    row: int | None
    L: float
    base: float

    @property
    def ok(self):
        return self.shell is not None


def order_stat_profile(x, marks):
    """``x*_q`` (q-th largest modulus, 1-based) for each ``q`` in ``marks``."""
    a = np.sort(np.abs(np.asarray(x).ravel()))[::-1]
    out = []
    for q in marks:
        q = int(q)
        if not 1 <= q <= a.size:
            raise IndexError(f"rank {q} outside [1, {a.size}]")
        out.append(float(a[q - 1]))
    return out


def build_shell_from_vector(B, x, M, J, d, alpha):
    """Construct the shell of an almost-null vector, as in the order-statistics argument.

    With ``L`` the largest l1 norm of a row outside ``M`` and
    ``base = min_{j in J}|x_j|``, the vector must satisfy
    ``|row_i . x| <= (2 alpha)^-1 (2 alpha L)^-d base`` for rows outside ``M``.
    Then for every row ``i`` outside ``M`` and column ``l`` with
    ``|b_il| >= 1/alpha`` and ``|x_l| >= (2 alpha L)^-d base`` the column
    ``f(i, l)`` is the ``h != l`` with ``b_ih != 0`` and
    ``|x_h| >= |x_l| / (2 alpha L)`` of largest modulus (smallest index on
    ties).  Layers are ``C_0 = J`` and ``C_{q+1} = f(pairs with l in C_q)``.
    """
    B = np.asarray(B)
    x = np.asarray(x).ravel()
    if B.ndim != 2 or B.shape[1] != x.size:
        raise DimensionError(f"matrix of shape {B.shape} and vector of size {x.size}")
    d = int(d)
    if d < 1:
        raise PreconditionError("depth must be at least 1")
    J = sorted(set(int(j) for j in J))
    if not J:
        raise PreconditionError("J must be nonempty")
    ax = np.abs(x)
    if not np.any(ax[J] > 0):
        raise PreconditionError("x vanishes on J")
    Mset = frozenset(int(i) for i in M)
    outside = np.array([i for i in range(B.shape[0]) if i not in Mset], dtype=np.int64)
    base = float(ax[J].min())
    absB = np.abs(B)
    L = float(absB[outside].sum(axis=1).max()) if outside.size else 0.0
    if L == 0.0:
        layers = (frozenset(J),) + (frozenset(),) * d
        return ShellOutcome(Shell(Mset, layers), None, None, L, base)
    grow = 2.0 * alpha * L
    floor_d = base / grow**d
    bound = floor_d / (2.0 * alpha)
    products = np.abs(B[outside] @ x)
    bad = np.nonzero(products > bound)[0]
    if bad.size:
        return ShellOutcome(None, "hypothesis", int(outside[bad[0]]), L, base)
    large = absB >= 1.0 / alpha
    nonzero = B != 0
    f = {}
    for i in outside.tolist():
        cols = np.nonzero(large[i] & (ax >= floor_d))[0]
        if cols.size == 0:
            continue
        support = np.nonzero(nonzero[i])[0]
        for ell in cols.tolist():
            cand = support[(support != ell) & (ax[support] >= ax[ell] / grow)]
            if cand.size == 0:
                return ShellOutcome(None, "numerical", i, L, base)
            f[(i, ell)] = int(cand[np.argmax(ax[cand])])
    layers = [frozenset(J)]
    witness = {}
    for q in range(d):
        nxt = set()
        for (i, ell), h in f.items():
            if ell in layers[q]:
                nxt.add(h)
                witness[(q, i, ell)] = h
        layers.append(frozenset(nxt))
    return ShellOutcome(Shell(Mset, tuple(layers), witness), None, None, L, base)


@dataclass(frozen=True)
class ShellValidation:
    valid: bool
    violations: list


def validate_shell(S, G):
    """Check every obligation; violations are ``(layer, column, row)`` triples."""
    violations = []
    for q in range(S.depth):
        nxt = np.zeros(G.n_right, dtype=bool)
        nxt[list(S.layers[q + 1])] = True
        for j in sorted(S.layers[q]):
            for i in G.arrow_out[j].tolist():
                if i in S.M:
                    continue
                row = G.left_out[i]
                if not np.any(nxt[row[row != j]]):
                    violations.append((q, j, i))
    return ShellValidation(not violations, violations)


# growth of shells


@dataclass(frozen=True)
class GrowthVerdict:
    """Outcome of :func:`shell_growth_check`.

    ``status`` is ``"pass"``, ``"fail"``, ``"hypothesis-not-met"`` or
    ``"report-only"`` (hypotheses checked only by sampling).
    """

    status: str
    failed_hypotheses: list
    sizes: list
    bounds: list
    exhaustive: bool

    @property
    def holds(self):
        return all(s >= b for s, b in zip(self.sizes, self.bounds))


def growth_bounds(m, delta, epsilon, size_J, depth):
    """``min(floor(delta m / 4), (32 epsilon)^-l |J|)`` for ``l = 0..depth``."""
    cap = math.floor(delta * m / 4)
    return [min(cap, (32 * epsilon) ** (-ell) * size_J) for ell in range(depth + 1)]


def growth_hypotheses(G, P, K, epsilon, delta, J, M, exhaustive_limit=16):
    """Failed hypotheses of the growth bound and whether the scan was exhaustive."""
    m = G.n_right
    J = set(int(j) for j in J)
    failed = []
    if not 0 < epsilon < 1.0 / 32:
        failed.append("epsilon")
    if not J:
        failed.append("empty center")
    if len(J) > delta * m / 2:
        failed.append("center too large")
    infinite = set(P.infinite.tolist())
    if not J <= infinite:
        failed.append("center not of infinite type")
    if K <= 0 or (2.0 / K) * sum(G.left_out[i].size for i in M) > len(J) / 2:
        failed.append("exempt rows too heavy")
    size = math.floor(delta * m)
    exhaustive = m <= exhaustive_limit
    if size >= 2:
        if exhaustive:
            rep = expansion_check_exhaustive(G, epsilon, K, max_size=size)
        else:
            rep = expansion_check(G, epsilon, K, size)
        if not rep.holds:
            failed.append("expansion")
    return failed, exhaustive


def shell_growth_check(S, G, P, K, epsilon, delta, J, exhaustive_limit=16):
    """Compare layer sizes with the growth bound when the hypotheses hold.

    The shell must be valid and centred at ``J``.  With ``m <= exhaustive_limit``
    columns the expansion hypothesis is verified over every set and a
    violated bound gives status ``"fail"``; larger graphs only report.
    """
    m = G.n_right
    failed, exhaustive = growth_hypotheses(G, P, K, epsilon, delta, J, S.M, exhaustive_limit)
    if set(S.center) != set(int(j) for j in J):
        failed.append("shell not centred at J")
    if not validate_shell(S, G).valid:
        failed.append("invalid shell")
    sizes = S.sizes()
    bounds = growth_bounds(m, delta, epsilon, len(J), S.depth)
    if failed:
        return GrowthVerdict("hypothesis-not-met", failed, sizes, bounds, exhaustive)
    ok = all(s >= b for s, b in zip(sizes, bounds))
    if not exhaustive:
        return GrowthVerdict("report-only", [], sizes, bounds, False)
    return GrowthVerdict("pass" if ok else "fail", [], sizes, bounds, True)


def _obligation_masks(G, M, layer):
    """Bitmasks a next layer must hit, one per (row outside M, large column in layer)."""
    masks = []
    for j in sorted(layer):
        for i in G.arrow_out[j].tolist():
            if i in M:
                continue
            row = G.left_out[i]
            masks.append(int(sum(1 << int(t) for t in row if t != j)))
    return masks


def _valid_next(masks, m):
    subsets = np.arange(1 << m, dtype=np.int64)
    ok = np.ones(1 << m, dtype=bool)
    for mk in set(masks):
        ok &= (subsets & mk) != 0
    return ok


def _minimal(ok, m):
    keep = ok.copy()
    subsets = np.arange(1 << m, dtype=np.int64)
    for b in range(m):
        has = (subsets >> b) & 1 == 1
        keep[has] &= ~ok[subsets[has] ^ (1 << b)]
    return np.nonzero(keep)[0]


def minimal_layer_sizes(G, M, J, depth):
    """Smallest possible ``|C_l|`` over all M-shells of the given depth centred at ``J``.

    Exhaustive over subsets of the ``m <= 16`` columns.  Only inclusion-minimal
    layers need extending, since a smaller layer imposes fewer obligations.
    Returns ``None`` when no shell exists, and a list of sizes otherwise.
    """
    m = G.n_right
    if m > 16:
        raise PreconditionError("exhaustive shell search is limited to 16 columns")
    M = frozenset(M)
    best = [len(set(J))] + [math.inf] * depth
    frontier = [frozenset(int(j) for j in J)]
    for level in range(1, depth + 1):
        nxt = {}
        for layer in frontier:
            masks = _obligation_masks(G, M, layer)
            if any(mk == 0 for mk in masks):
                continue
            if not masks:
                nxt[0] = frozenset()
                continue
            for s in _minimal(_valid_next(masks, m), m).tolist():
                nxt[s] = frozenset(t for t in range(m) if s >> t & 1)
        if not nxt:
            return None
        sizes = [len(v) for v in nxt.values()]
        best[level] = min(sizes)
        frontier = list(nxt.values())
    return best


# almost-null vectors


@dataclass(frozen=True)
class DecayVerdict:
    """Outcome of :func:`order_stat_decay_check`; ``status`` as in :class:`GrowthVerdict`."""

    status: str
    failed_hypotheses: list
    ranks: list
    values: list
    bounds: list


def order_stat_decay_check(B, x, G, P, M, J, d, alpha, K, epsilon, delta, exhaustive_limit=16):
    """``x*_{k_q} >= (2 alpha L)^-q min_J |x|`` with ``k_q = min(floor(delta m/4), (32 eps)^-q |J|)``.

    Asserted (status ``pass``/``fail``) when the shell hypothesis and the
    growth hypotheses all hold and were checked exhaustively.
    """
    m = G.n_right
    failed, exhaustive = growth_hypotheses(G, P, K, epsilon, delta, J, M, exhaustive_limit)
    out = build_shell_from_vector(B, x, M, J, d, alpha)
    if not out.ok:
        failed.append(f"shell: {out.failure}")
    ranks, vals, bounds = [], [], []
    grow = 2.0 * alpha * out.L
    for q in range(1, d + 1):
        kq = math.floor(min(math.floor(delta * m / 4), (32 * epsilon) ** (-q) * len(J)))
        if kq < 1 or grow == 0:
            continue
        ranks.append(kq)
        vals.append(order_stat_profile(x, [kq])[0])
        bounds.append(out.base / grow**q)
    if failed:
        return DecayVerdict("hypothesis-not-met", failed, ranks, vals, bounds)
    if not exhaustive:
        return DecayVerdict("report-only", [], ranks, vals, bounds)
    ok = all(v >= b for v, b in zip(vals, bounds))
    return DecayVerdict("pass" if ok else "fail", [], ranks, vals, bounds)


@dataclass(frozen=True)
class NullVectorProfile:
    """Exponents recovered from an almost-null vector.

    For each rank ``q`` with ``E(q) = log^2(4n/q) log^2(pn + log(4n/q))``:
    ``needed[q]`` is the smallest ``C`` with
    ``x*_q <= (2 alpha)^(C E(q)) x*_{floor(c/p)}`` and ``allowed[q]`` the
    largest ``C`` for which the norm hypothesis
    ``||B x|| <= sqrt(n)/(2 alpha) (2 alpha)^(-C E(q)) x*_q`` holds.
    """

    ranks: list
    needed: list
    allowed: list
    reference_rank: int

    @property
    def constant(self):
        return max(self.needed, default=0.0)


def null_vector_profile(B, x, p, alpha, c=1.0, ranks=None):
    """Report-only exponents for the no-very-sparse-null-vector implication."""
    B = np.asarray(B)
    x = np.asarray(x).ravel()
    n = x.size
    pn = p * n
    ref = max(1, min(n, math.floor(c / p)))
    if ranks is None:
        ranks = list(range(1, ref + 1))
    base = math.log(2 * alpha)
    resid = float(np.linalg.norm(B @ x))
    x_ref = order_stat_profile(x, [ref])[0]
    needed, allowed = [], []
    for q in ranks:
        xq = order_stat_profile(x, [q])[0]
        ell = math.log(4 * n / q)
        E = ell**2 * math.log(pn + ell) ** 2
        if xq == 0:
            needed.append(0.0)
        elif x_ref == 0:
            needed.append(math.inf)
        else:
            needed.append(max(0.0, math.log(xq / x_ref) / base / E))
        if resid == 0:
            allowed.append(math.inf)
        elif xq == 0:
            allowed.append(-math.inf)
        else:
            allowed.append(math.log(math.sqrt(n) * xq / (2 * alpha * resid)) / base / E)
    return NullVectorProfile(list(ranks), needed, allowed, ref)


def infinite_type_hits(S, P):
    """``|union of layers ∩ infinite type|``, the statistic of the hit-infinite-type bound."""
    union = set().union(*S.layers) if S.layers else set()
    return len(union & set(P.infinite.tolist()))


def infinite_type_reference(S, G, L):
    """``(d + 1) max(n / sqrt(L), sum_{i in M} |out(i)|)`` for a depth-``d`` shell.

    The shell's columns are expected to meet the infinite types at least this
    often when its centre is large; the comparison is reported, not asserted.
    """
    heavy = sum(G.left_out[i].size for i in S.M)
    return (S.depth + 1) * max(G.n_right / math.sqrt(L), float(heavy))


__all__ = [
    "Shell",
    "ShellOutcome",
    "build_shell_from_vector",
    "validate_shell",
    "shell_growth_check",
    "growth_bounds",
    "minimal_layer_sizes",
    "order_stat_profile",
    "order_stat_decay_check",
    "null_vector_profile",
    "infinite_type_hits",
    "infinite_type_reference",
]
