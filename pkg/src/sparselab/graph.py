"""Bipartite digraph of a matrix and the structural events evaluated on it.

Rows are left vertices and columns are right vertices.  ``i -> j`` when
``b_ij != 0`` and ``i <- j`` when ``|b_ij| >= 1/alpha``.  For a right vertex
``j`` the in-neighbours are the rows with ``i -> j`` and the out-neighbours
are the rows with ``i <- j``.  For a left vertex ``i`` the out-neighbours
are its row support and the in-neighbours the columns with ``i <- j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, PreconditionError

_EMPTY = np.zeros(0, dtype=np.int64)


def _split_by(keys, vals, size):
    """Group ``vals`` by ``keys`` into ``size`` sorted arrays."""
    order = np.lexsort((vals, keys))
    keys, vals = keys[order], vals[order]
    bounds = np.searchsorted(keys, np.arange(size + 1))
    return tuple(vals[bounds[t]:bounds[t + 1]].astype(np.int64) for t in range(size))


@dataclass(frozen=True, eq=False)
class BipartiteDigraph:
    """Two edge relations on ``n_left`` rows and ``n_right`` columns.

    ``arrow`` and ``large`` are boolean CSR matrices of shape
    ``(n_left, n_right)``: ``arrow[i, j]`` encodes ``i -> j`` and
    ``large[i, j]`` encodes ``i <- j``.  ``right_labels`` carries the
    parent column indices of a subgraph (``arange(n_right)`` otherwise).
    """

    n_left: int
    n_right: int
    arrow: sp.csr_matrix
    large: sp.csr_matrix
    has_horizontal: bool
    right_labels: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.right_labels is None:
            object.__setattr__(self, "right_labels", np.arange(self.n_right, dtype=np.int64))
        if (self.large > self.arrow).nnz:
            raise PreconditionError("every <- edge must also be a -> edge")

    @classmethod
    def from_edges(cls, n_left, n_right, arrows, larges=(), has_horizontal=None):
        """Build from explicit ``(i, j)`` edge lists; ``larges`` must be a subset."""
        arrows = set(map(tuple, arrows))
        larges = set(map(tuple, larges))
        if not larges <= arrows:
            raise PreconditionError("every <- edge must also be a -> edge")
        for i, j in arrows:
            if not (0 <= i < n_left and 0 <= j < n_right):
                raise IndexError(f"edge {(i, j)} out of range")
        a = _bool_csr(arrows, n_left, n_right)
        b = _bool_csr(larges, n_left, n_right)
        if has_horizontal is None:
            has_horizontal = n_left == n_right and all(
                (i, i) in larges for i in range(n_left)
            )
        return cls(n_left, n_right, a, b, bool(has_horizontal))

    # per-vertex views
    @cached_property
    def arrow_in(self):
        """For each right j, the sorted left vertices with ``i -> j``."""
        r, c = self.arrow.nonzero()
        return _split_by(c, r, self.n_right)

    @cached_property
    def arrow_out(self):
        """For each right j, the sorted left vertices with ``i <- j``."""
        r, c = self.large.nonzero()
        return _split_by(c, r, self.n_right)

    @cached_property
    def left_out(self):
        """For each left i, the sorted right vertices with ``i -> j``."""
        r, c = self.arrow.nonzero()
        return _split_by(r, c, self.n_left)

    @cached_property
    def left_in(self):
        """For each left i, the sorted right vertices with ``i <- j``."""
        r, c = self.large.nonzero()
        return _split_by(r, c, self.n_left)

    @cached_property
    def in_degree(self):
        return np.asarray(self.arrow.sum(axis=0)).ravel().astype(np.int64)

    @cached_property
    def out_degree(self):
        return np.asarray(self.large.sum(axis=0)).ravel().astype(np.int64)

    @cached_property
    def row_degree(self):
        return np.asarray(self.arrow.sum(axis=1)).ravel().astype(np.int64)

    def edge_sets(self):
        """``(arrows, larges)`` as frozensets of ``(i, j)`` pairs."""
        a = frozenset(zip(*map(lambda v: v.tolist(), self.arrow.nonzero())))
        b = frozenset(zip(*map(lambda v: v.tolist(), self.large.nonzero())))
        return a, b

    def __eq__(self, other):
        if not isinstance(other, BipartiteDigraph):
            return NotImplemented
        return (
            self.n_left == other.n_left
            and self.n_right == other.n_right
            and self.has_horizontal == other.has_horizontal
            and np.array_equal(self.right_labels, other.right_labels)
            and self.edge_sets() == other.edge_sets()
        )

    __hash__ = None

    def transpose(self):
        """Swap the roles of rows and columns (``i -> j`` becomes ``j -> i``)."""
        return BipartiteDigraph(
            self.n_right,
            self.n_left,
            self.arrow.T.tocsr(),
            self.large.T.tocsr(),
            self.has_horizontal,
        )


def _bool_csr(pairs, n_left, n_right):
    if pairs:
        r, c = np.array(sorted(pairs)).T
    else:
        r = c = _EMPTY
    data = np.ones(len(r), dtype=bool)
    return sp.csr_matrix((data, (r, c)), shape=(n_left, n_right), dtype=bool)


def _as_array(B):
    values = getattr(B, "values", None)
    if values is None:
        values = getattr(B, "entries", B)
    return np.asarray(values)


def build_graph(B, alpha, rectangular=False):
    """Graph of a matrix: ``->`` on nonzero cells, ``<-`` on cells of modulus >= 1/alpha.

    Accepts a :class:`~sparselab.sampling.ShiftedMatrix`, a
    :class:`~sparselab.sampling.MatrixSample` or a plain array.  Non-square
    input raises :class:`DimensionError` unless ``rectangular`` is set.
    """
    if not alpha >= 1:
        raise PreconditionError("alpha must be at least 1")
    M = _as_array(B)
    if M.ndim != 2:
        raise DimensionError("expected a matrix")
    k, m = M.shape
    if k != m and not rectangular:
        raise DimensionError(f"expected a square matrix, got {k}x{m}")
    absM = np.abs(M)
    nz = M != 0
    big = nz & (absM >= 1.0 / alpha)
    horizontal = k == m and k > 0 and bool(np.all(np.diagonal(big)))
    return BipartiteDigraph(k, m, sp.csr_matrix(nz), sp.csr_matrix(big), horizontal)


def neighbors(G, side, direction, I):
    """Union of the neighbour lists of the vertex set ``I``.

    ``side`` is ``"left"`` or ``"right"`` and ``direction`` is ``"in"`` or
    ``"out"``.  Returns a sorted integer array.
    """
    I = np.asarray(sorted(set(int(v) for v in I)), dtype=np.int64)
    size = G.n_right if side == "right" else G.n_left
    if side not in ("left", "right") or direction not in ("in", "out"):
        raise ValueError("side must be left/right and direction in/out")
    if I.size and (I[0] < 0 or I[-1] >= size):
        raise IndexError(f"vertex out of range for the {side} side of size {size}")
    if I.size == 0:
        return _EMPTY.copy()
    table = {
        ("right", "in"): G.arrow_in,
        ("right", "out"): G.arrow_out,
        ("left", "out"): G.left_out,
        ("left", "in"): G.left_in,
    }[(side, direction)]
    return np.unique(np.concatenate([table[v] for v in I]))


# Expansion


@dataclass(frozen=True)
class ExpansionReport:
    """Outcome of an expansion scan.

    ``worst_violations`` lists up to ``max_report`` sets with positive
    deficit, largest first.  ``sampled`` is set when sizes above three were
    probed heuristically.  ``empirical_epsilon`` is the largest
    ``overlap / (pn |I|)`` seen over the examined sets.
    """

    holds: bool
    worst_violations: list
    sampled: bool
    empirical_epsilon: float
    sets_checked: int
    exhaustive_up_to: int


def overlap(G, I):
    """``sum_{j in I} |in(j)| - |in(I)|`` for a right set ``I``."""
    I = list(I)
    return int(G.in_degree[I].sum()) - len(neighbors(G, "right", "in", I))


def expansion_check(G, epsilon, pn, k_max, samples=200, seed=0, max_report=20):
    """Scan the event ``|in(I)| >= sum_{j in I}|in(j)| - epsilon*pn*|I|``.

    Every set of size two and three is covered exactly.  Pairs come from the
    column co-occurrence matrix; triples are enumerated around a centre that
    shares rows with both other members.  A triple in which only one pair
    overlaps has a smaller deficit than that pair, so it is not listed.
    Sizes 4..k_max are probed by greedy growth from the worst pairs, by
    top in-degree prefixes and by ``samples`` random connected sets.
    """
    slack = float(epsilon) * float(pn)
    m = G.n_right
    found = {}
    best_ratio = 0.0
    checked = 0

    def record(I, ov):
        nonlocal best_ratio
        deficit = ov - slack * len(I)
        if pn > 0:
            best_ratio = max(best_ratio, ov / (pn * len(I)))
        if deficit > 0:
            found[tuple(sorted(int(v) for v in I))] = float(deficit)

    A = G.arrow.astype(np.int64).tocsc()
    C = (A.T @ A).tocsr()
    C = (C - sp.diags(C.diagonal())).tocsr()
    C.eliminate_zeros()
    upper = sp.triu(C, k=1).tocoo()
    if k_max >= 2:
        checked += m * (m - 1) // 2
        for a, b, o in zip(upper.row, upper.col, upper.data):
            record((a, b), int(o))
    if k_max >= 3:
        checked += m * (m - 1) * (m - 2) // 6
        Ar = G.arrow.astype(np.int64).tocsr()
        for b in range(m):
            lo, hi = C.indptr[b], C.indptr[b + 1]
            nb = C.indices[lo:hi]
            if nb.size < 2:
                continue
            o_b = C.data[lo:hi].astype(np.int64)
            o_ac = C[nb][:, nb].toarray()
            rows_b = G.arrow_in[b]
            X = Ar[rows_b][:, nb].toarray()
            t = X.T @ X
            total = o_b[:, None] + o_b[None, :] + o_ac - t
            iu, ju = np.triu_indices(nb.size, k=1)
            keep = ~((o_ac[iu, ju] > 0) & (np.minimum(nb[iu], nb[ju]) < b))
            vals = total[iu, ju]
            if pn > 0:
                best_ratio = max(best_ratio, float(vals[keep].max(initial=0)) / (3 * pn))
            hit = np.nonzero(keep & (vals - 3 * slack > 0))[0]
            for t in hit:
                I = tuple(sorted((int(nb[iu[t]]), b, int(nb[ju[t]]))))
                found[I] = vals[t] - 3 * slack
    sampled = k_max > 3 and m > 3
    if sampled:
        rng = np.random.default_rng(seed)
        for I in _candidate_sets(G, C, k_max, samples, rng):
            checked += 1
            record(I, overlap(G, I))
    worst = sorted(found.items(), key=lambda kv: (-kv[1], kv[0]))[:max_report]
    return ExpansionReport(
        holds=not found,
        worst_violations=[(I, float(d)) for I, d in worst],
        sampled=sampled,
        empirical_epsilon=float(best_ratio),
        sets_checked=int(checked),
        exhaustive_up_to=min(3, k_max),
    )


def _candidate_sets(G, C, k_max, samples, rng):
    m = G.n_right
    by_degree = np.argsort(-G.in_degree, kind="stable")
    for s in range(4, min(k_max, m) + 1):
        yield tuple(by_degree[:s].tolist())
    coo = sp.triu(C, k=1).tocoo()
    seeds = np.argsort(-coo.data, kind="stable")[:5]
    starts = [(int(coo.row[t]), int(coo.col[t])) for t in seeds]
    for a, b in starts:
        I = [a, b]
        covered = set(neighbors(G, "right", "in", I).tolist())
        while len(I) < min(k_max, m):
            best, gain = None, -1
            for v in C.indices[C.indptr[I[-1]]:C.indptr[I[-1] + 1]]:
                if v in I:
                    continue
                g = len(covered.intersection(G.arrow_in[v].tolist()))
                if g > gain:
                    best, gain = int(v), g
            if best is None:
                break
            I.append(best)
            covered.update(G.arrow_in[best].tolist())
            if len(I) >= 4:
                yield tuple(I)
    for _ in range(samples):
        size = int(rng.integers(4, max(5, min(k_max, m) + 1)))
        v = int(rng.integers(m))
        I = [v]
        while len(I) < size:
            pool = np.setdiff1d(
                np.concatenate([C.indices[C.indptr[u]:C.indptr[u + 1]] for u in I]), I
            )
            if pool.size == 0:
                pool = np.setdiff1d(np.arange(m), I)
                if pool.size == 0:
                    break
            I.append(int(rng.choice(pool)))
        if len(I) >= 4:
            yield tuple(I)


def expansion_check_exhaustive(G, epsilon, pn, max_size=None):
    """Exact scan over every right set with ``2 <= |I| <= max_size``.

    Intended for ``n_right <= 20``; uses a bitmask table of neighbourhood
    unions.  Returns an :class:`ExpansionReport` with ``sampled=False``.
    """
    m = G.n_right
    if m > 22:
        raise PreconditionError("exhaustive expansion scan is limited to 22 right vertices")
    max_size = m if max_size is None else min(max_size, m)
    union = _union_table(G)
    sizes = _popcount(np.arange(1 << m, dtype=np.int64))
    deg = G.in_degree
    degsum = np.zeros(1 << m, dtype=np.int64)
    for j in range(m):
        bit = 1 << j
        degsum[bit:2 * bit] = degsum[:bit] + deg[j]
    card = _popcount(union).sum(axis=1)
    ov = degsum - card
    sel = (sizes >= 2) & (sizes <= max_size)
    slack = float(epsilon) * float(pn)
    deficit = ov - slack * sizes
    bad = np.nonzero(sel & (deficit > 0))[0]
    order = bad[np.argsort(-deficit[bad], kind="stable")][:20]
    ratio = 0.0
    if pn > 0 and sel.any():
        ratio = float(np.max(ov[sel] / (pn * sizes[sel])))
    return ExpansionReport(
        holds=bad.size == 0,
        worst_violations=[(_bits(int(s), m), float(deficit[s])) for s in order],
        sampled=False,
        empirical_epsilon=ratio,
        sets_checked=int(sel.sum()),
        exhaustive_up_to=max_size,
    )


def _bits(mask, m):
    return tuple(j for j in range(m) if mask >> j & 1)


def _popcount(a):
    a = a.copy()
    count = np.zeros_like(a)
    while a.any():
        count += a & 1
        a >>= 1
    return count


def _union_table(G):
    """Array over right subsets of the left-neighbourhood union, as bit chunks."""
    m = G.n_right
    words = max(1, (G.n_left + 62) // 63)
    col_bits = np.zeros((m, words), dtype=np.int64)
    for j in range(m):
        for i in G.arrow_in[j]:
            col_bits[j, i // 63] |= np.int64(1) << np.int64(i % 63)
    table = np.zeros((1 << m, words), dtype=np.int64)
    for j in range(m):
        bit = 1 << j
        table[bit:2 * bit] = table[:bit] | col_bits[j]
    return table


# Degree and l1 tails


@dataclass(frozen=True)
class DegreeTailReport:
    """Tail counts ``#{deg >= 2pn + u}`` for ``u = 0, 1, ...`` until both vanish.

    ``constant`` is the largest ``c`` with ``count_u <= n exp(-c (pn + u))``
    for every ``u`` on both sides (``inf`` when all counts are zero, 0 when
    no positive ``c`` works).  ``union_constant`` is a constant ``C`` for
    which ``sum_{j in M}|in(j)| <= C (pn + log(n/|M|)) |M|`` follows from the
    right-side tail bound, or ``None`` when no positive ``c`` is available.
    """

    pn: float
    left_counts: np.ndarray
    right_counts: np.ndarray
    constant: float
    right_constant: float
    union_constant: float | None


def _tail_counts(deg, threshold):
    out = []
    u = 0
    while True:
        c = int(np.count_nonzero(deg >= threshold + u))
        out.append(c)
        if c == 0:
            break
        u += 1
    return np.array(out, dtype=np.int64)


def _tail_constant(counts, n, pn):
    c = math.inf
    for u, cnt in enumerate(counts):
        if cnt == 0:
            continue
        if pn + u <= 0:
            return 0.0
        c = min(c, math.log(n / cnt) / (pn + u))
    return max(c, 0.0)


def degree_tail_report(G, pn):
    """Tail counts of left out-degrees and right in-degrees above ``2pn``."""
    pn = float(pn)
    left = _tail_counts(G.row_degree, 2 * pn)
    right = _tail_counts(G.in_degree, 2 * pn)
    c_left = _tail_constant(left, G.n_left, pn)
    c_right = _tail_constant(right, G.n_right, pn)
    union_c = None
    if c_right == math.inf:
        union_c = 2.0
    elif c_right > 0 and pn > 0:
        union_c = max(2.0, 1.0 / c_right) + (1.0 + 1.0 / (1.0 - math.exp(-c_right))) / pn
    return DegreeTailReport(pn, left, right, min(c_left, c_right), c_right, union_c)


@dataclass(frozen=True)
class L1TailReport:
    """Per ``r``: rows and columns with l1 norm at least ``r * pn`` and the verdicts."""

    pn: float
    r_values: np.ndarray
    row_counts: np.ndarray
    col_counts: np.ndarray
    limits: np.ndarray
    holds: np.ndarray

    @property
    def all_hold(self):
        return bool(np.all(self.holds))


def l1_tail_report(A, pn=None, r_values=None):
    """Counts of heavy rows and columns in l1 norm and the event ``count <= n / r**0.9``.

    The default grid is ``r = pn * 2**t`` for ``t = 0 .. ceil(log2(max_row_l1 / pn**2))``
    (just ``t = 0`` when that bound is negative).
    """
    M = np.abs(_as_array(A))
    n = M.shape[0]
    if pn is None:
        pn = getattr(A, "pn", None)
        if pn is None:
            raise PreconditionError("pn must be given for a plain array")
    pn = float(pn)
    rows = M.sum(axis=1)
    cols = M.sum(axis=0)
    if r_values is None:
        top = float(rows.max(initial=0.0))
        t_max = 0
        if top > 0 and pn > 0:
            t_max = max(0, math.ceil(math.log2(top / pn**2)))
        r_values = pn * 2.0 ** np.arange(t_max + 1)
    r = np.asarray(r_values, dtype=float)
    rc = np.array([np.count_nonzero(rows >= x * pn) for x in r], dtype=np.int64)
    cc = np.array([np.count_nonzero(cols >= x * pn) for x in r], dtype=np.int64)
    lim = n / r**0.9
    holds = (rc <= lim) & (cc <= lim)
    return L1TailReport(pn, r, rc, cc, lim, holds)


def remove_right(G, I):
    """Subgraph without the right vertices in ``I``; columns keep their labels.

    ``I`` holds labels (parent indices), so repeated removals compose.
    """
    drop = set(int(v) for v in I)
    labels = G.right_labels
    unknown = drop.difference(labels.tolist())
    if unknown:
        raise IndexError(f"right vertices {sorted(unknown)} are not in the graph")
    keep = np.array([t for t, lab in enumerate(labels.tolist()) if lab not in drop], dtype=np.int64)
    return BipartiteDigraph(
        G.n_left,
        len(keep),
        G.arrow[:, keep].tocsr(),
        G.large[:, keep].tocsr(),
        False,
        labels[keep],
    )
