"""Flat ``key=value`` experiment configuration.

Pairs may share a line or sit on separate lines; ``#`` starts a comment.
Lists are comma separated.  Complex numbers are written ``re+imi`` (for
example ``0+1i``) or as a ``re,im`` pair.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError, LabIOError
from ..sampling import EntryDistribution

KINDS = (
    "smin_survey",
    "esd_survey",
    "chain_census",
    "shell_growth",
    "bt_success",
    "stieltjes_compare",
    "type_mass",
    "event_probe",
)

_U64 = (1 << 64) - 1
_MATRIX_KINDS = frozenset(KINDS) - {"bt_success"}
_REQUIRED = {kind: ("n", "trials", "master_seed") + (("p", "alpha") if kind in _MATRIX_KINDS else ("bt_k", "eta", "rho"))
             for kind in KINDS}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters; see :data:`KINDS` for the pipelines."""

    kind: str
    n: int
    trials: int
    master_seed: int
    p: float = 0.0
    alpha: float = 1.0
    z: complex = 0j
    dist: EntryDistribution = field(default_factory=EntryDistribution.rademacher)
    mode: str = "raw"
    # combinatorics
    K: float | None = None
    K_factor: float = 1.0
    epsilon: float = 0.01
    delta: float = 0.5
    k_max: int | None = None
    cap: int = 10**7
    depth: int = 2
    # restricted invertibility
    bt_k: int = 0
    eta: float = 0.5
    rho: float = 1.0
    bt_mode: str = "uniform"
    basis: str = "fourier"
    c_tilde: float = 0.01
    c_hat: float = 0.1
    C_cap: float = 16.0
    c_low: float = 0.05
    # spectra
    L: float | None = None
    gaussian_mean: float = 0.0
    T_marks: tuple = (1.0, 2.0, 4.0)
    radii: tuple = (0.3, 0.5, 0.8)
    ws: tuple = (1j, 0.5 + 0.5j)
    # row events
    q: int | None = None
    tau: float = 1.0
    C_row: float = 4.0
    output_path: str | None = None

    def effective_K(self):
        """``K`` if set, else ``K_factor * pn / (2 alpha)``."""
        if self.K is not None:
            return self.K
        return self.K_factor * self.p * self.n / (2.0 * self.alpha)

    def effective_k_max(self):
        """``k_max`` if set, else ``floor(log_{pn} n)`` (at least 1)."""
        if self.k_max is not None:
            return self.k_max
        pn = self.p * self.n
        if pn <= 1:
            return 1
        return max(1, math.floor(math.log(self.n) / math.log(pn) + 1e-12))

    def items(self):
        """``(key, value)`` pairs in declaration order."""
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def to_text(self):
        """Config document that :func:`load_config` parses back to an equal config."""
        out = []
        for k, v in self.items():
            if v is None:
                continue
            out.append(f"{k}={_render(v)}")
        return "\n".join(out) + "\n"


def _render(v):
    if isinstance(v, EntryDistribution):
        return v.describe()
    if isinstance(v, complex):
        return f"{v.real!r},{v.imag!r}"
    if isinstance(v, tuple):
        return ";".join(_render(x) for x in v) if any(isinstance(x, complex) for x in v) else ",".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PAIR = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)")


def _tokens(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        pos = 0
        for m in _PAIR.finditer(line):
            if line[pos:m.start()].strip():
                raise ConfigError(f"line {lineno}: cannot parse {line[pos:m.start()].strip()!r}")
            key, val = m.group(1), m.group(2)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}")
            out[key] = val
            pos = m.end()
        if line[pos:].strip():
            raise ConfigError(f"line {lineno}: cannot parse {line[pos:].strip()!r}")
    return out


def parse_complex(text):
    s = text.strip()
    if "," in s:
        re_s, im_s = s.split(",", 1)
        return complex(float(re_s), float(im_s))
    return complex(s.replace("i", "j"))


def _as_int(key, v):
    try:
        f = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None
    if not f.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(v) if re.fullmatch(r"[+-]?\d+", v) else int(f)


def _as_float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _as_complex(key, v):
    try:
        return parse_complex(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a complex number, got {v!r}") from None


_INT = {"n", "trials", "master_seed", "k_max", "cap", "depth", "bt_k", "q"}
_FLOAT = {"p", "alpha", "K", "K_factor", "epsilon", "delta", "eta", "rho", "c_tilde", "c_hat",
          "C_cap", "c_low", "L", "gaussian_mean", "tau", "C_row"}
_CHOICES = {"mode": ("raw", "girko"), "bt_mode": ("uniform", "bernoulli"), "basis": ("fourier", "haar")}


def _convert(key, v):
    if key in _INT:
        return _as_int(key, v)
    if key in _FLOAT:
        return _as_float(key, v)
    if key == "z":
        return _as_complex(key, v)
    if key == "dist":
        return EntryDistribution.parse(v)
    if key in ("T_marks", "radii"):
        return tuple(_as_float(key, t) for t in v.split(",") if t)
    if key == "ws":
        return tuple(_as_complex(key, t) for t in v.split(";") if t)
    if key in _CHOICES:
        if v not in _CHOICES[key]:
            raise ConfigError(f"{key}: expected one of {', '.join(_CHOICES[key])}")
        return v
    return v


def _check(cfg):
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    need(cfg.n >= 1, "n out of range")
    need(cfg.trials >= 1, "trials out of range")
    need(0 <= cfg.master_seed <= _U64, "master_seed out of range")
    if cfg.kind in _MATRIX_KINDS:
        need(0 < cfg.p <= 1, "p out of range")
        need(cfg.alpha >= 1, "alpha out of range")
    need(cfg.K is None or cfg.K >= 0, "K out of range")
    need(cfg.K_factor >= 0, "K_factor out of range")
    need(0 < cfg.epsilon, "epsilon out of range")
    need(0 < cfg.delta <= 1, "delta out of range")
    need(cfg.k_max is None or cfg.k_max >= 1, "k_max out of range")
    need(cfg.cap >= 0, "cap out of range")
    need(cfg.depth >= 1, "depth out of range")
    if cfg.kind == "bt_success":
        need(1 <= cfg.bt_k <= cfg.n, "bt_k out of range")
        need(0 < cfg.eta < 1, "eta out of range")
        need(cfg.rho > 0, "rho out of range")
    need(all(v > 0 for v in (cfg.c_tilde, cfg.c_hat, cfg.C_cap, cfg.c_low)), "constant overrides must be positive")
    need(cfg.L is None or cfg.L >= 0, "L out of range")
    need(all(w.imag > 0 for w in cfg.ws), "ws must lie in the upper half-plane")
    need(all(r >= 0 for r in cfg.radii), "radii out of range")
    need(cfg.q is None or cfg.q >= 1, "q out of range")
    need(cfg.tau > 0, "tau out of range")


def load_config(source):
    """Parse and validate a config from text or a path.

    ``source`` is read as a file when it is a :class:`~pathlib.Path` or a
    string naming an existing file without ``=``; otherwise it is the
    document itself.
    """
    if isinstance(source, Path) or ("=" not in str(source) and Path(str(source)).exists()):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise LabIOError(f"cannot read {source}: {exc.strerror or exc}") from exc
    else:
        text = str(source)
    raw = _tokens(text)
    kind = raw.pop("kind", None)
    if kind is None:
        raise ConfigError("missing required key 'kind'")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}")
    known = {f.name for f in fields(ExperimentConfig)} - {"kind"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
    for key in _REQUIRED[kind]:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    values = {k: _convert(k, v) for k, v in raw.items()}
    cfg = ExperimentConfig(kind=kind, **values)
    _check(cfg)
    return cfg
