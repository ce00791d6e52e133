"""Seeded generation of sparse random matrices and their shifted variants.

A sample is the entrywise product of a Bernoulli(p) mask with i.i.d. values
drawn from an :class:`EntryDistribution`.  Values are drawn for every cell so
that the frozen set of the hybrid Gaussian comparison is defined everywhere.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_TOL = 1e-12
_U64 = (1 << 64) - 1


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EntryDistribution:
    """Law of a single value xi.

    ``kind`` is one of ``rademacher``, ``standard_gaussian``,
    ``uniform_symmetric`` (needs ``width``, support [-width, width]) or
    ``discrete`` (needs ``values`` and ``probs``).  ``mean`` and ``variance``
    are derived from the kind; if supplied they must agree within 1e-12.
    """

    kind: str
    width: float | None = None
    values: tuple = ()
    probs: tuple = ()
    mean: float | None = None
    variance: float | None = None

    def __post_init__(self):
        kind = self.kind
        if kind == "rademacher":
            m, v = 0.0, 1.0
        elif kind == "standard_gaussian":
            m, v = 0.0, 1.0
        elif kind == "uniform_symmetric":
            if self.width is None or not self.width > 0 or not math.isfinite(self.width):
                raise ConfigError("uniform_symmetric needs a positive finite width")
            m, v = 0.0, self.width**2 / 3.0
        elif kind == "discrete":
            vals = tuple(float(x) for x in self.values)
            probs = tuple(float(x) for x in self.probs)
            if not vals or len(vals) != len(probs):
                raise ConfigError("discrete distribution needs matching values and probs")
            if any(q < 0 or not math.isfinite(q) for q in probs):
                raise ConfigError("discrete probs must be non-negative")
            if abs(math.fsum(probs) - 1.0) > _TOL:
                raise ConfigError("discrete probs must sum to 1")
            if not all(math.isfinite(x) for x in vals):
                raise ConfigError("discrete values must be finite")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "probs", probs)
            m = math.fsum(q * x for q, x in zip(probs, vals))
            v = math.fsum(q * (x - m) ** 2 for q, x in zip(probs, vals))
        else:
            raise ConfigError(f"unknown distribution kind {kind!r}")
        for name, val in (("mean", m), ("variance", v)):
            given = getattr(self, name)
            if given is None:
                object.__setattr__(self, name, val)
            elif abs(given - val) > _TOL:
                raise ConfigError(f"declared {name} {given} does not match {val}")

    @classmethod
    def rademacher(cls):
        return cls("rademacher")

    @classmethod
    def standard_gaussian(cls):
        return cls("standard_gaussian")

    @classmethod
    def uniform_symmetric(cls, width):
        return cls("uniform_symmetric", width=float(width))

    @classmethod
    def discrete(cls, values, probs):
        return cls("discrete", values=tuple(values), probs=tuple(probs))

    @property
    def theta(self):
        return self.mean

    def describe(self):
        """Compact token used in file headers and configs."""
        if self.kind == "uniform_symmetric":
            return f"uniform_symmetric:{self.width!r}"
        if self.kind == "discrete":
            vals = ",".join(repr(x) for x in self.values)
            probs = ",".join(repr(x) for x in self.probs)
            return f"discrete:{vals};{probs}"
        return self.kind

    @classmethod
    def parse(cls, token):
        """Inverse of :meth:`describe`."""
        kind, _, rest = token.partition(":")
        try:
            if kind == "uniform_symmetric":
                return cls.uniform_symmetric(float(rest))
            if kind == "discrete":
                vals, _, probs = rest.partition(";")
                return cls.discrete(
                    [float(x) for x in vals.split(",") if x],
                    [float(x) for x in probs.split(",") if x],
                )
        except ValueError as exc:
            raise ConfigError(f"bad distribution token {token!r}") from exc
        if rest:
            raise ConfigError(f"bad distribution token {token!r}")
        return cls(kind)

    def sample(self, rng, shape):
        if self.kind == "rademacher":
            return np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        if self.kind == "standard_gaussian":
            return rng.standard_normal(shape)
        if self.kind == "uniform_symmetric":
            return rng.uniform(-self.width, self.width, shape)
        idx = rng.choice(len(self.values), size=shape, p=np.asarray(self.probs))
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """Sparse matrix ``entries = mask * xi`` together with its provenance."""

    n: int
    p: float
    alpha: float
    mask: np.ndarray
    xi: np.ndarray
    entries: np.ndarray
    seed: int
    dist: EntryDistribution
    xi_seed: int | None = None

    @property
    def pn(self):
        return self.p * self.n

    def coo(self):
        """Row indices, column indices and values of the nonzero cells."""
        rows, cols = np.nonzero(self.entries)
        return rows, cols, self.entries[rows, cols]


@dataclass(frozen=True, eq=False)
class ShiftedMatrix:
    """``values = scale * A - z * I`` for a sample ``A``.

    ``a3_satisfied`` records whether every cell of the raw matrix is at
    distance at least 1/alpha from z.  It is ``None`` in girko mode, where
    the check does not apply.  ``frozen`` is the boolean mask of cells kept
    by :func:`hybrid_gaussianize` (``None`` otherwise).
    """

    source: MatrixSample
    z: complex
    scale: float
    values: np.ndarray
    mode: str
    a3_satisfied: bool | None
    shift_applied_after_scale: bool = True
    frozen: np.ndarray | None = field(default=None)

    @property
    def n(self):
        return self.source.n

    @property
    def alpha(self):
        return self.source.alpha


def _stream_seed(master, index, tag):
    data = str(tag).encode("utf-8")
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Qq", master, index))
    h.update(data)
    return int.from_bytes(h.digest(), "little")


def derive_trial_seed(master_seed, trial_index, stream_tag):
    """Counter-based 64-bit seed for one (trial, stream) pair.

    Pure and platform independent: a BLAKE2b digest of the master seed,
    the trial index and the UTF-8 tag.
    """
    master_seed = int(master_seed)
    if not 0 <= master_seed <= _U64:
        raise ConfigError("master seed must fit in 64 unsigned bits")
    return _stream_seed(master_seed, int(trial_index), str(stream_tag))


def _rng(seed, tag):
    return np.random.Generator(np.random.PCG64(_stream_seed(int(seed) & _U64, 0, tag)))


def sample_matrix(n, p, alpha, dist, seed, xi_seed=None):
    """Draw ``A = mask * xi`` with a Bernoulli(p) mask and values from ``dist``.

    The mask and the values come from separate streams derived from ``seed``;
    ``xi_seed`` overrides the value stream only.  ``p = 0`` is accepted and
    gives the zero matrix.
    """
    n = int(n)
    if n < 1:
        raise ConfigError("n must be a positive integer")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ConfigError("p out of range")
    if not alpha >= 1:
        raise ConfigError("alpha must be at least 1")
    if not isinstance(dist, EntryDistribution):
        raise ConfigError("dist must be an EntryDistribution")
    seed = int(seed)
    if not 0 <= seed <= _U64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    mask = _rng(seed, "mask").random((n, n)) < p
    xi = dist.sample(_rng(seed if xi_seed is None else xi_seed, "xi"), (n, n)).astype(float)
    entries = np.where(mask, xi, 0.0)
    return MatrixSample(
        n=n,
        p=p,
        alpha=float(alpha),
        mask=_readonly(mask),
        xi=_readonly(xi),
        entries=_readonly(entries),
        seed=seed,
        dist=dist,
        xi_seed=None if xi_seed is None else int(xi_seed),
    )


def _scale_for(A, mode):
    if mode == "raw":
        return 1.0
    if mode == "girko":
        if A.pn <= 0:
            raise ConfigError("girko scaling needs p*n > 0")
        return 1.0 / math.sqrt(A.pn)
    raise ConfigError(f"unknown scaling mode {mode!r}")


def shift_and_scale(A, z, mode="raw"):
    """Return ``scale * A - z * I`` with ``scale`` 1 (raw) or 1/sqrt(pn) (girko).

    In raw mode the cells are scanned for ``|a_ij - z| >= 1/alpha``; the
    scan covers every cell, zero or not.
    """
    z = complex(z)
    scale = _scale_for(A, mode)
    values = A.entries.astype(complex) * scale
    idx = np.arange(A.n)
    values[idx, idx] -= z
    a3 = None
    if mode == "raw":
        a3 = bool(np.min(np.abs(A.entries - z)) >= 1.0 / A.alpha)
    return ShiftedMatrix(
        source=A,
        z=z,
        scale=scale,
        values=_readonly(values),
        mode=mode,
        a3_satisfied=a3,
    )


def hybrid_gaussianize(B, L, theta, gaussian_mean, seed):
    """Replace the cells with ``|xi - theta| <= L`` by fresh Gaussians.

    A replaced cell receives ``scale' * g`` with ``g ~ N(gaussian_mean, 1)``
    where ``scale'`` is 1 in raw mode and 1/sqrt(n) in girko mode, so that
    the replacement has the variance of a normalised dense entry.  The
    diagonal shift ``-z`` is kept.  Cells with ``|xi - theta| > L`` keep
    their value bit for bit and form the frozen set.
    """
    L = float(L)
    if not L >= 0:
        raise ConfigError("threshold L must be non-negative")
    A = B.source
    frozen = np.abs(A.xi - float(theta)) > L
    rng = _rng(seed, "hybrid")
    g = float(gaussian_mean) + rng.standard_normal((A.n, A.n))
    unit = 1.0 if B.mode == "raw" else 1.0 / math.sqrt(A.n)
    fresh = (unit * g).astype(complex)
    idx = np.arange(A.n)
    fresh[idx, idx] -= B.z
    values = np.where(frozen, B.values, fresh)
    return ShiftedMatrix(
        source=A,
        z=B.z,
        scale=B.scale,
        values=_readonly(values),
        mode=B.mode,
        a3_satisfied=None,
        shift_applied_after_scale=B.shift_applied_after_scale,
        frozen=_readonly(frozen),
    )
