"""Vertex types, chains, self-balancing detection and chain census.

Right vertex ``j`` has type ``(K, 1)`` when it has at most ``K``
out-neighbours.  In round ``l`` every unassigned vertex whose out-neighbours,
minus the in-neighbourhood of the vertices assigned so far, number at most
``K`` receives type ``(K, l)``.  What never gets assigned has infinite type.

A chain steps from a right vertex ``j`` to any other column in the support
of row ``j`` (a right-to-left horizontal edge followed by a left-to-right
edge).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

INFINITE = 0


@dataclass(frozen=True, eq=False)
class TypePartition:
    """Result of :func:`classify_types`.

    ``assignment[t]`` is the layer of the ``t``-th right vertex (``0`` for
    infinite type).  ``layers`` and ``infinite`` hold vertex labels, and
    ``closure_in`` is the sorted left set ``in(union of finite layers)``.
    """

    K: float
    assignment: np.ndarray
    layers: tuple
    infinite: np.ndarray
    closure_in: np.ndarray
    right_labels: np.ndarray
    n_left: int

    @property
    def finite(self):
        """Labels of all finite-type vertices, sorted."""
        if not self.layers:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(self.layers))

    def layer_of(self, label):
        """Layer of the vertex with this label (0 for infinite type)."""
        pos = np.searchsorted(self.right_labels, label)
        if pos >= len(self.right_labels) or self.right_labels[pos] != label:
            raise IndexError(f"vertex {label} not in partition")
        return int(self.assignment[pos])

    def layer_sets(self):
        """Layers as a list of Python sets (handy for comparisons)."""
        return [set(L.tolist()) for L in self.layers]


def classify_types(G, K):
    """Assign every right vertex of ``G`` a finite layer or infinite type."""
    K = float(K)
    if K < 0:
        raise PreconditionError("K must be non-negative")
    m = G.n_right
    arrow = G.arrow.astype(np.int64)
    largeT = G.large.T.astype(np.int64).tocsr()
    assignment = np.zeros(m, dtype=np.int64)
    covered = np.zeros(G.n_left, dtype=bool)
    unassigned = np.ones(m, dtype=bool)
    layers = []
    level = 0
    while unassigned.any():
        level += 1
        free = largeT @ (~covered).astype(np.int64)
        new = unassigned & (free <= K)
        if not new.any():
            break
        assignment[new] = level
        unassigned &= ~new
        layers.append(G.right_labels[new])
        covered |= (arrow @ new.astype(np.int64)) > 0
    return TypePartition(
        K=K,
        assignment=assignment,
        layers=tuple(layers),
        infinite=G.right_labels[unassigned],
        closure_in=np.nonzero(covered)[0].astype(np.int64),
        right_labels=G.right_labels.copy(),
        n_left=G.n_left,
    )


def _check_pair(P, G):
    if P.n_left != G.n_left or not np.array_equal(P.right_labels, G.right_labels):
        raise PreconditionError("type partition was not built from this graph")


@dataclass(frozen=True)
class FiniteTypeMass:
    count: int
    fraction: float


def finite_type_mass(P, G):
    """Size of the in-neighbourhood of all finite-type vertices."""
    _check_pair(P, G)
    count = int(len(P.closure_in))
    return FiniteTypeMass(count, count / G.n_left if G.n_left else 0.0)


# Chains


@dataclass(frozen=True)
class Chain:
    """A sequence of right vertices with distinct neighbours.

    ``kind`` is ``cycle_free`` (all distinct), ``cyclic`` (the first k-1
    distinct and the last equal to an earlier non-adjacent element) or
    ``general`` otherwise.
    """

    vertices: tuple
    kind: str
    self_balancing: bool | None = None

    def __len__(self):
        return len(self.vertices)


def chain_kind(vertices):
    """Classify a sequence as ``cycle_free``, ``cyclic`` or ``general``."""
    v = tuple(vertices)
    if len(set(v)) == len(v):
        return "cycle_free"
    head = v[:-1]
    if len(set(head)) == len(head) and v[-1] in head[:-1]:
        return "cyclic"
    return "general"


@dataclass(frozen=True)
class ChainEnumeration:
    chains: list
    truncated: bool

    def __iter__(self):
        return iter(self.chains)

    def __len__(self):
        return len(self.chains)

    def vertex_tuples(self):
        return {c.vertices for c in self.chains}


def _walk(successors, m, k, starts, cap, cycle_free_only=False):
    """Depth-first enumeration of sequences of length ``k`` along ``successors``."""
    if k < 1:
        raise PreconditionError("chain length must be at least 1")
    out = []
    truncated = False
    starts = range(m) if starts is None else sorted(set(int(s) for s in starts))
    stack = [(int(s),) for s in reversed(list(starts))]
    while stack:
        seq = stack.pop()
        if len(seq) == k:
            if cap is not None and len(out) >= cap:
                truncated = True
                break
            out.append(Chain(seq, chain_kind(seq)))
            continue
        nxt = successors(seq[-1])
        for j in reversed(nxt.tolist()):
            if cycle_free_only and j in seq:
                continue
            stack.append(seq + (j,))
    return ChainEnumeration(out, truncated)


def _require_horizontal(G):
    if not G.has_horizontal:
        raise PreconditionError("chains need a graph with all horizontal edges")


def chain_successors(G):
    """Per right vertex ``j``: the row support of ``j`` without ``j`` itself."""
    return tuple(s[s != j] for j, s in enumerate(G.left_out))


def enumerate_chains(G, k, starts=None, cap=None):
    """All chains of length exactly ``k`` (optionally from ``starts``), up to ``cap``."""
    _require_horizontal(G)
    succ = chain_successors(G)
    return _walk(succ.__getitem__, G.n_right, k, starts, cap)


def self_balancing_vertices(G, P):
    """Boolean mask of right vertices ``j`` that are finite and whose
    out-neighbours all lie in ``in(finite vertices other than j)``."""
    _check_pair(P, G)
    finite = P.assignment != INFINITE
    counts = G.arrow.astype(np.int64) @ finite.astype(np.int64)
    mask = finite.copy()
    for j in np.nonzero(finite)[0]:
        outs = G.arrow_out[j]
        # a row in out(j) also points to j, so it must see one more finite column
        if outs.size and counts[outs].min() < 2:
            mask[j] = False
    return mask


def is_self_balancing(J, G, P):
    """Whether every element of the chain ``J`` is a self-balancing vertex."""
    vertices = J.vertices if isinstance(J, Chain) else tuple(J)
    mask = self_balancing_vertices(G, P)
    return bool(all(mask[v] for v in vertices))


@dataclass(frozen=True)
class CensusRow:
    k: int
    cycle_free: int
    cyclic: int
    self_balancing_cf: int
    self_balancing_cyclic_found: bool
    truncated: bool


@dataclass(frozen=True)
class ChainCensus:
    K: float
    rows: list
    example_self_balancing_cyclic: tuple | None = None

    @property
    def truncated(self):
        return any(r.truncated for r in self.rows)

    @property
    def any_self_balancing_cyclic(self):
        return any(r.self_balancing_cyclic_found for r in self.rows)


def _level_counts(succ, allowed, k_max, budget):
    """Counts of cycle-free and cyclic chains for ``k = 1..k_max``.

    Only cycle-free prefixes are extended; the extensions of a prefix are
    counted without being materialised.  ``budget`` bounds the number of
    chains counted; levels that exhaust it are flagged.
    """
    cf = [0] * (k_max + 1)
    cyc = [0] * (k_max + 1)
    trunc = [False] * (k_max + 1)
    example = None
    prefixes = [(int(j),) for j in np.nonzero(allowed)[0]]
    if len(prefixes) > budget:
        for k in range(1, k_max + 1):
            trunc[k] = True
        cf[1] = min(len(prefixes), budget)
        return cf, cyc, trunc, example
    cf[1] = len(prefixes)
    budget -= len(prefixes)
    for k in range(2, k_max + 1):
        nxt = []
        extend = k < k_max
        for seq in prefixes:
            s = succ[seq[-1]]
            s = s[allowed[s]]
            if s.size == 0:
                continue
            earlier = np.isin(s, seq[:-1])
            n_cyc = int(earlier.sum())
            n_cf = int(s.size) - n_cyc
            if n_cyc + n_cf > budget:
                trunc[k:] = [True] * (k_max + 1 - k)
                return cf, cyc, trunc, example
            budget -= n_cyc + n_cf
            cf[k] += n_cf
            cyc[k] += n_cyc
            if n_cyc and example is None:
                example = seq + (int(s[earlier][0]),)
            if extend:
                nxt.extend(seq + (int(j),) for j in s[~earlier])
        prefixes = nxt
    return cf, cyc, trunc, example


def chain_census(G, P, k_max, cap=10**7):
    """Counts of chains per length and of self-balancing ones.

    A chain is self-balancing exactly when all its elements are, so the
    self-balancing counts come from the same walk restricted to those
    vertices.
    """
    _require_horizontal(G)
    _check_pair(P, G)
    k_max = int(k_max)
    if k_max < 1:
        raise PreconditionError("k_max must be at least 1")
    succ = chain_successors(G)
    everything = np.ones(G.n_right, dtype=bool)
    cf, cyc, trunc, _ = _level_counts(succ, everything, k_max, int(cap))
    sb = self_balancing_vertices(G, P)
    sb_cf, sb_cyc, sb_trunc, example = _level_counts(succ, sb, k_max, int(cap))
    rows = [
        CensusRow(
            k=k,
            cycle_free=cf[k],
            cyclic=cyc[k],
            self_balancing_cf=sb_cf[k],
            self_balancing_cyclic_found=sb_cyc[k] > 0,
            truncated=trunc[k] or sb_trunc[k],
        )
        for k in range(1, k_max + 1)
    ]
    return ChainCensus(P.K, rows, example)


def canonical_k0(pn, alpha):
    """The canonical type threshold ``pn / (2 alpha)``."""
    return float(pn) / (2.0 * float(alpha))
