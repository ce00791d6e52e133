"""Plain-text dumps of matrices, graphs, maps and shells, and the CSV tables.

Floats are written with ``%.17g`` so binary64 values survive a round trip.
CSV output follows RFC 4180 (``csv`` module defaults: CRLF line ends,
minimal quoting).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compression import AdmissibleMap
from .errors import ConfigError, LabIOError
from .graph import BipartiteDigraph
from .sampling import EntryDistribution
from .shells import Shell


def fmt_float(x):
    """``%.17g`` with ``inf``/``-inf``/``nan`` spelled the way ``float()`` reads them."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{fmt_float(v.real)}{'+' if not v.imag < 0 else '-'}{fmt_float(abs(v.imag))}i"
    return str(v)


def csv_text(header, rows):
    """Header plus rows as RFC 4180 text."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_cell(v) for v in row])
    return buf.getvalue()


def write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise LabIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_text(path):
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LabIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


# matrices


@dataclass(frozen=True, eq=False)
class MatrixFile:
    """Contents of a matrix file: header fields and the dense matrix."""

    n: int
    p: float
    alpha: float
    seed: int
    dist: EntryDistribution
    theta: float
    values: np.ndarray


def dump_matrix(A, values=None):
    """Header ``n p alpha seed dist_kind theta`` and one ``i j re im`` line per nonzero.

    ``A`` is a :class:`MatrixSample` (or a shifted matrix, whose source
    supplies the header); ``values`` overrides the dense array written.
    """
    src = getattr(A, "source", A)
    if values is None:
        values = A.values if src is not A else A.entries
    M = np.asarray(values)
    lines = [
        f"{src.n} {fmt_float(src.p)} {fmt_float(src.alpha)} {src.seed} "
        f"{src.dist.describe()} {fmt_float(src.dist.theta)}"
    ]
    rows, cols = np.nonzero(M)
    for i, j in zip(rows.tolist(), cols.tolist()):
        v = complex(M[i, j])
        lines.append(f"{i} {j} {fmt_float(v.real)} {fmt_float(v.imag)}")
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty matrix file")
    head = lines[0].split()
    if len(head) != 6:
        raise ConfigError("matrix header must be 'n p alpha seed dist_kind theta'")
    try:
        n, p, alpha, seed = int(head[0]), float(head[1]), float(head[2]), int(head[3])
        theta = float(head[5])
    except ValueError as exc:
        raise ConfigError(f"bad matrix header: {lines[0]!r}") from exc
    dist = EntryDistribution.parse(head[4])
    values = np.zeros((n, n), dtype=complex)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ConfigError(f"bad matrix line: {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"index out of range: {ln!r}")
        values[i, j] = complex(float(parts[2]), float(parts[3]))
    if not np.any(values.imag):
        values = values.real.copy()
    return MatrixFile(n, p, alpha, seed, dist, theta, values)


# graphs


def dump_graph(G):
    """``n_left n_right`` then sorted ``A i j`` (arrow) and ``O i j`` (large) lines."""
    arrows, larges = G.edge_sets()
    lines = [f"{G.n_left} {G.n_right}"]
    lines += [f"A {i} {j}" for i, j in sorted(arrows)]
    lines += [f"O {i} {j}" for i, j in sorted(larges)]
    return "\n".join(lines) + "\n"


def parse_graph(text, has_horizontal=None):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty graph file")
    try:
        n_left, n_right = map(int, lines[0].split())
    except ValueError as exc:
        raise ConfigError("graph header must be 'n_left n_right'") from exc
    arrows, larges = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3 or parts[0] not in ("A", "O"):
            raise ConfigError(f"bad graph line: {ln!r}")
        (arrows if parts[0] == "A" else larges).append((int(parts[1]), int(parts[2])))
    return BipartiteDigraph.from_edges(n_left, n_right, arrows, larges, has_horizontal)


# maps and shells


def dump_map(phi):
    lines = [f"{phi.n} {phi.m}"]
    lines += [f"{i} {int(r)}" for i, r in enumerate(phi.table.tolist())]
    return "\n".join(lines) + "\n"


def parse_map(text, K=0.0, G=None):
    """Rebuild an :class:`AdmissibleMap`; the table must be in canonical order."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty map file")
    n, m = map(int, lines[0].split())
    table = np.full(n, -1, dtype=np.int64)
    for ln in lines[1:]:
        i, r = map(int, ln.split())
        table[i] = r
    if np.any(table < 0) or np.any(table >= m):
        raise ConfigError("map table incomplete or out of range")
    groups = {}
    for i, r in enumerate(table.tolist()):
        groups.setdefault(r, []).append(i)
    if len(groups) != m or any(len(g) > 2 for g in groups.values()):
        raise ConfigError("map is not a surjection with preimages of size 1 or 2")
    phi = AdmissibleMap.from_pairs(n, [tuple(g) for g in groups.values() if len(g) == 2], K, G)
    if not np.array_equal(phi.table, table):
        raise ConfigError("map rows are not ordered by smallest preimage")
    return phi


def dump_shell(S):
    """One line per layer with sorted, space-separated vertex indices."""
    return "".join(" ".join(str(v) for v in sorted(layer)) + "\n" for layer in S.layers)


def parse_shell(text, M=()):
    layers = tuple(frozenset(int(t) for t in ln.split()) for ln in text.split("\n")[:-1])
    return Shell(frozenset(M), layers)


# tables


CENSUS_HEADER = ["k", "cycle_free", "cyclic", "self_balancing_cf",
                 "self_balancing_cyclic_found", "truncated"]
BT_HEADER = ["trial", "ell", "|J|", "cond_norm", "cond_lower", "submatrix_smin"]


def census_csv(census):
    return csv_text(CENSUS_HEADER, [
        (r.k, r.cycle_free, r.cyclic, r.self_balancing_cf, r.self_balancing_cyclic_found, r.truncated)
        for r in census.rows
    ])


def singular_value_csv(sv):
    return csv_text(["index", "singular_value"], enumerate(np.asarray(sv, dtype=float).tolist()))


def eigenvalue_csv(lam):
    lam = np.asarray(lam, dtype=complex)
    return csv_text(["index", "re_lambda", "im_lambda"],
                    ((t, v.real, v.imag) for t, v in enumerate(lam.tolist())))


def bt_csv(samples):
    return csv_text(BT_HEADER, [
        (t, s.ell, len(s.J), s.cond_norm, s.cond_lower, s.submatrix_smin)
        for t, s in enumerate(samples)
    ])
