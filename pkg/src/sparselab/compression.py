"""Admissible compressions: gluing pairs of rows with disjoint supports.

A map ``phi`` from ``n`` rows onto ``m`` rows is admissible for ``(G, K)``
when each preimage has one or two elements and glued rows have disjoint
supports inside the infinite-type columns.  It is ``u``-light when no
column has more than ``u`` glued rows among its in-neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, PreconditionError
from .graph import BipartiteDigraph, build_graph
from .types_chains import INFINITE, _walk, classify_types

RETRY_BUDGET = 16


@dataclass(frozen=True, eq=False)
class AdmissibleMap:
    """Surjection ``table: [n] -> [m]`` gluing ``glued_pairs``.

    Compressed rows are ordered by their smallest preimage.
    """

    n: int
    m: int
    table: np.ndarray
    glued_pairs: tuple
    lightness_u: float
    K: float

    @classmethod
    def from_pairs(cls, n, pairs, K=0.0, G=None):
        """Build the map gluing each pair; ``lightness_u`` is computed when ``G`` is given."""
        rep = np.arange(n)
        seen = set()
        clean = []
        for a, b in pairs:
            a, b = int(a), int(b)
            if a == b or a in seen or b in seen or not (0 <= a < n and 0 <= b < n):
                raise PreconditionError(f"pair {(a, b)} is not a valid disjoint pair")
            seen.update((a, b))
            lo, hi = min(a, b), max(a, b)
            rep[hi] = lo
            clean.append((lo, hi))
        reps = np.unique(rep)
        table = np.searchsorted(reps, rep).astype(np.int64)
        table.setflags(write=False)
        u = lightness(table, G) if G is not None else 0.0
        return cls(n, len(reps), table, tuple(sorted(clean)), float(u), float(K))

    @classmethod
    def identity(cls, n, K=0.0):
        return cls.from_pairs(n, (), K)

    @property
    def preimages(self):
        out = [[] for _ in range(self.m)]
        for i, r in enumerate(self.table.tolist()):
            out[r].append(i)
        return [tuple(v) for v in out]

    @property
    def glued_rows(self):
        """Boolean mask over ``[n]`` of rows sharing their image."""
        counts = np.bincount(self.table, minlength=self.m)
        return counts[self.table] == 2


def lightness(table, G):
    """Largest number of glued rows among the in-neighbours of a column."""
    table = np.asarray(table)
    counts = np.bincount(table)
    glued = (counts[table] >= 2).astype(np.int64)
    if G.n_right == 0:
        return 0.0
    return float((G.arrow.T.astype(np.int64) @ glued).max(initial=0))


@dataclass(frozen=True)
class MapValidation:
    admissible: bool
    lightness_u: float
    violations: list


def validate_map(phi, G, P):
    """Re-derive every admissibility condition from scratch."""
    violations = []
    table = np.asarray(phi.table)
    if table.shape != (G.n_left,):
        violations.append(("domain", int(table.size), G.n_left))
        return MapValidation(False, math.nan, violations)
    if table.size and (table.min() < 0 or table.max() >= phi.m):
        violations.append(("range", int(table.min()), int(table.max())))
        return MapValidation(False, math.nan, violations)
    counts = np.bincount(table, minlength=phi.m)
    for r in np.nonzero(counts == 0)[0]:
        violations.append(("not_surjective", int(r)))
    for r in np.nonzero(counts > 2)[0]:
        violations.append(("preimage_size", int(r), int(counts[r])))
    infinite = set(P.infinite.tolist())
    labels = G.right_labels
    for r in np.nonzero(counts == 2)[0]:
        a, b = np.nonzero(table == r)[0].tolist()
        sa, sb = G.left_out[a], G.left_out[b]
        if np.intersect1d(sa, sb).size:
            violations.append(("overlap", a, b))
        support = set(labels[np.union1d(sa, sb)].tolist())
        if not support <= infinite:
            violations.append(("finite_support", a, b))
    u = lightness(table, G)
    return MapValidation(not violations, u, violations)


@dataclass(frozen=True)
class ConstructionResult:
    """Either a map or the name of the stage that starved."""

    phi: AdmissibleMap | None
    stage: str | None
    filtered: int
    pairs_found: int
    attempts: int

    @property
    def ok(self):
        return self.phi is not None


def build_admissible_map(G, P, J, epsilon, pn, seed, target_pairs=None, retries=RETRY_BUDGET):
    """Glue ``floor(epsilon |J|)`` pairs of rows from ``J`` in three steps.

    1. Keep rows of ``J`` with at most ``2pn`` nonzeros, support inside the
       infinite-type columns, and no entry in a heavy column (in-degree at
       least ``2pn``).
    2. Pair them greedily in a seeded random order, each row with the first
       later row of disjoint support.
    3. Draw ``floor(2 epsilon |J|)`` pairs at random, drop pairs touching a
       column that sees more than ``64 epsilon pn`` drawn pairs, and keep the
       first ``floor(epsilon |J|)``.  Step 3 is retried ``retries`` times.

    ``target_pairs`` overrides the number of pairs to glue.
    """
    if not 0 < epsilon < 1.0 / 32:
        raise ConfigError("epsilon must lie in (0, 1/32)")
    if not np.array_equal(P.right_labels, G.right_labels):
        raise PreconditionError("type partition was not built from this graph")
    n = G.n_left
    J = sorted(set(int(j) for j in J))
    target = math.floor(epsilon * len(J)) if target_pairs is None else int(target_pairs)
    identity = AdmissibleMap.identity(n, P.K)
    if target < 1:
        return ConstructionResult(identity, None, 0, 0, 0)
    rng = np.random.default_rng(seed)
    # step 1
    heavy = np.nonzero(G.in_degree >= 2 * pn)[0]
    touches_heavy = np.zeros(n, dtype=bool)
    for j in heavy:
        touches_heavy[G.arrow_in[j]] = True
    infinite = P.assignment == INFINITE
    kept = [
        i
        for i in J
        if G.left_out[i].size <= 2 * pn
        and bool(np.all(infinite[G.left_out[i]]))
        and not touches_heavy[i]
    ]
    if len(kept) < 2 * target:
        return ConstructionResult(None, "filter", len(kept), 0, 0)
    # step 2
    order = rng.permutation(kept).tolist()
    used = set()
    H1 = []
    for t, a in enumerate(order):
        if a in used:
            continue
        sa = set(G.left_out[a].tolist())
        for b in order[t + 1:]:
            if b not in used and sa.isdisjoint(G.left_out[b].tolist()):
                H1.append((a, b))
                used.update((a, b))
                break
        else:
            used.add(a)
    if len(H1) < target:
        return ConstructionResult(None, "pairing", len(kept), len(H1), 0)
    # step 3
    draw = min(len(H1), max(math.floor(2 * epsilon * len(J)), target))
    cap = 64 * epsilon * pn
    for attempt in range(1, retries + 1):
        pick = rng.choice(len(H1), size=draw, replace=False)
        Q = [H1[t] for t in pick]
        touch = np.zeros(n, dtype=np.int64)
        for a, b in Q:
            touch[a] = touch[b] = 1
        load = G.arrow.T.astype(np.int64) @ touch
        crowded = np.nonzero(load > cap)[0]
        bad = np.zeros(n, dtype=bool)
        for u in crowded:
            bad[G.arrow_in[u]] = True
        H2 = [(a, b) for a, b in Q if not (bad[a] or bad[b])][:target]
        if len(H2) == target:
            phi = AdmissibleMap.from_pairs(n, H2, P.K, G)
            return ConstructionResult(phi, None, len(kept), len(H1), attempt)
    return ConstructionResult(None, "thinning", len(kept), len(H1), retries)


def random_admissible_map(G, P, rng, max_pairs=None):
    """A random admissible map: greedily glue random pairs of eligible rows.

    Eligible rows have support inside the infinite-type columns; pairs must
    have disjoint supports.  Useful for property tests on small graphs.
    """
    infinite = P.assignment == INFINITE
    rows = [i for i in range(G.n_left) if bool(np.all(infinite[G.left_out[i]]))]
    rng.shuffle(rows)
    pairs = []
    used = set()
    for t, a in enumerate(rows):
        if max_pairs is not None and len(pairs) >= max_pairs:
            break
        if a in used:
            continue
        for b in rows[t + 1:]:
            if b in used:
                continue
            if np.intersect1d(G.left_out[a], G.left_out[b]).size == 0 and rng.random() < 0.7:
                pairs.append((a, b))
                used.update((a, b))
                break
    return AdmissibleMap.from_pairs(G.n_left, pairs, P.K, G)


@dataclass(frozen=True)
class CompressionResult:
    matrix: np.ndarray
    graph: object


def compress_rows(M, phi):
    """Sum the rows of ``M`` within each preimage of ``phi``."""
    M = np.asarray(M)
    out = np.zeros((phi.m, M.shape[1]), dtype=M.dtype)
    np.add.at(out, phi.table, M)
    return out


def apply_compression(B, phi, alpha=None):
    """Compressed matrix and its graph; the map must be admissible for ``B``.

    ``B`` is a shifted matrix or a square array (then ``alpha`` is required).
    """
    M = np.asarray(getattr(B, "values", B))
    if alpha is None:
        alpha = getattr(B, "alpha", None)
        if alpha is None:
            raise PreconditionError("alpha is needed for a plain array")
    G = build_graph(M, alpha)
    P = classify_types(G, phi.K)
    verdict = validate_map(phi, G, P)
    if not verdict.admissible:
        raise PreconditionError(f"map is not admissible: {verdict.violations[:3]}")
    C = compress_rows(M, phi)
    return CompressionResult(C, build_graph(C, alpha, rectangular=True))


def compress_graph(G, phi):
    """The compressed graph, obtained by uniting the glued rows' edges."""
    S = sp.csr_matrix(
        (np.ones(phi.n, dtype=np.int64), (phi.table, np.arange(phi.n))), shape=(phi.m, phi.n)
    )
    a = (S @ G.arrow.astype(np.int64)) > 0
    b = (S @ G.large.astype(np.int64)) > 0
    return BipartiteDigraph(phi.m, G.n_right, a.tocsr(), b.tocsr(), False, G.right_labels.copy())


def phi_successors(Gphi, phi):
    """Per right vertex ``j``: columns reached from compressed row ``phi(j)``, without ``j``."""
    rows = Gphi.left_out
    return tuple(rows[r][rows[r] != j] for j, r in enumerate(phi.table.tolist()))


def enumerate_phi_chains(Gphi, phi, k, cap=None, starts=None):
    """All phi-chains of length ``k`` (at most ``cap``) for the compressed graph."""
    succ = phi_successors(Gphi, phi)
    return _walk(succ.__getitem__, phi.n, k, starts, cap)


def chain_sources(Gphi, phi, S, k):
    """Starting vertices of phi-chains of length at most ``k`` ending in ``S``."""
    if k < 1:
        raise PreconditionError("k must be at least 1")
    pre = phi.preimages
    W = set(int(s) for s in S)
    frontier = set(W)
    for _ in range(k - 1):
        new = set()
        for j2 in frontier:
            for r in Gphi.arrow_in[j2].tolist():
                for j1 in pre[r]:
                    if j1 != j2 and j1 not in W:
                        new.add(j1)
        if not new:
            break
        # anything reaching an older member of W was already added
        W |= new
        frontier = new
    return W


def chain_source_count(Gphi, phi, S, k):
    """``|W_{k,S}|``: how many vertices start a phi-chain of length <= k ending in S."""
    return len(chain_sources(Gphi, phi, S, k))


@dataclass(frozen=True)
class SourceCountReport:
    """``|W_{k,S}|`` for ``k = 1..k_max`` and the constant that the growth implies.

    ``constants[k-1]`` is ``(|W_k| / |S|)**(1/(k-1)) / (pn + log(n/|S|))``
    (0 for ``k = 1``); ``meeting`` gives the same data for the chains
    meeting a set ``V`` of compressed rows, normalised with exponent ``k``.
    """

    sizes: list
    constants: list
    meeting_sizes: list | None = None
    meeting_constants: list | None = None

    @property
    def constant(self):
        vals = list(self.constants) + list(self.meeting_constants or [])
        return max(vals, default=0.0)


def meeting_vertices(Gphi, V):
    """Right vertices with an in-neighbour in the compressed row set ``V``."""
    V = np.asarray(sorted(set(int(v) for v in V)), dtype=np.int64)
    if V.size == 0:
        return set()
    hit = np.asarray(Gphi.arrow[V].sum(axis=0)).ravel() > 0
    return set(np.nonzero(hit)[0].tolist())


def source_count_report(Gphi, phi, S, k_max, pn, V=None):
    """Sizes of ``W_{k,S}`` and empirical constants of the bound shape."""
    S = set(int(s) for s in S)
    n = phi.n
    sizes, consts = [], []
    for k in range(1, k_max + 1):
        w = chain_source_count(Gphi, phi, S, k)
        sizes.append(w)
        if k == 1 or not S:
            consts.append(0.0)
        else:
            consts.append((w / len(S)) ** (1.0 / (k - 1)) / (pn + math.log(n / len(S))))
    msizes = mconsts = None
    if V is not None and len(V):
        Vp = meeting_vertices(Gphi, V)
        msizes, mconsts = [], []
        for k in range(1, k_max + 1):
            w = chain_source_count(Gphi, phi, Vp, k) if Vp else 0
            msizes.append(w)
            mconsts.append((w / len(V)) ** (1.0 / k) / (pn + math.log(n / len(V))))
    return SourceCountReport(sizes, consts, msizes, mconsts)
