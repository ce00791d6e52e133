"""Monte Carlo orchestration: one pipeline per experiment kind.

Every trial derives its seeds from ``(master_seed, trial index, tag)``, so
rows do not depend on execution order or on the number of worker threads.
A trial that raises is recorded in the report instead of aborting the run.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import graph, restricted_inv, sampling, shells, spectra, types_chains
from ..errors import LabError
from ..sampling import derive_trial_seed
from .config import ExperimentConfig


@dataclass
class ExperimentReport:
    """Rows keyed by trial, aggregate statistics and counters.

    ``errors`` maps trial index to the message of a failed trial; such a
    trial still has a row, with empty cells for the values it did not reach.
    """

    config: ExperimentConfig
    columns: list
    rows: list
    aggregates: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    wall_clock: float = 0.0


def _sample(cfg, t):
    seed = derive_trial_seed(cfg.master_seed, t, "sample")
    return seed, sampling.sample_matrix(cfg.n, cfg.p, cfg.alpha, cfg.dist, seed)


# pipelines: each returns (row dict, counters dict)


def _smin(cfg, t):
    seed, A = _sample(cfg, t)
    B = sampling.shift_and_scale(A, cfg.z, cfg.mode)
    s = spectra.singular_values(B)
    return {"seed": seed, "s_min": float(s[-1]), "a3_satisfied": B.a3_satisfied}, {}


def _esd(cfg, t):
    seed, A = _sample(cfg, t)
    B = sampling.shift_and_scale(A, 0j, "girko")
    met = spectra.esd_metrics(B.values, cfg.radii)
    row = {"seed": seed, "second_abs_moment": met.second_abs_moment}
    dev = 0.0
    for r in cfg.radii:
        row[f"cdf_{r!r}"] = met.radial_cdf[float(r)]
        dev = max(dev, abs(met.radial_cdf[float(r)] - spectra.disc_cdf(r)))
    row["max_cdf_deviation"] = dev
    return row, {}


def _graph_and_types(cfg, t):
    seed, A = _sample(cfg, t)
    B = sampling.shift_and_scale(A, cfg.z, "raw")
    G = graph.build_graph(B.values, cfg.alpha)
    K = cfg.effective_K()
    return seed, B, G, types_chains.classify_types(G, K), K


def _census(cfg, t):
    seed, B, G, P, K = _graph_and_types(cfg, t)
    k_max = cfg.effective_k_max()
    cen = types_chains.chain_census(G, P, k_max, cfg.cap)
    row = {"seed": seed, "K": K, "has_horizontal": G.has_horizontal}
    for r in cen.rows:
        row[f"cycle_free_{r.k}"] = r.cycle_free
        row[f"cyclic_{r.k}"] = r.cyclic
        row[f"self_balancing_cf_{r.k}"] = r.self_balancing_cf
        # empirical c in |I_k| = n exp(-c pn k); inf when no chain survives
        pnk = cfg.p * cfg.n * r.k
        row[f"decay_exponent_{r.k}"] = (math.log(cfg.n / r.self_balancing_cf) / pnk
                                        if r.self_balancing_cf and pnk > 0 else math.inf)
    row["self_balancing_cyclic_found"] = cen.any_self_balancing_cyclic
    row["truncated"] = cen.truncated
    return row, {"truncated": int(cen.truncated)}


def _shell_growth(cfg, t):
    """Exact minimal shell sizes against the growth bound on a small graph."""
    seed, B, G, P, K = _graph_and_types(cfg, t)
    rng = np.random.default_rng(derive_trial_seed(cfg.master_seed, t, "center"))
    m = G.n_right
    row = {"seed": seed, "K": K, "n_infinite": int(P.infinite.size)}
    size = max(1, math.floor(cfg.delta * m / 2))
    J = sorted(rng.choice(P.infinite, size=min(size, P.infinite.size), replace=False).tolist()) \
        if P.infinite.size else []
    row["center_size"] = len(J)
    failed, exhaustive = (["empty center"], m <= 16) if not J else \
        shells.growth_hypotheses(G, P, K, cfg.epsilon, cfg.delta, J, frozenset(), 16)
    row["exhaustive"] = exhaustive
    sizes = shells.minimal_layer_sizes(G, frozenset(), J, cfg.depth) if J and m <= 16 else None
    if sizes is None:
        status = "no-shell" if J and m <= 16 else "hypothesis-not-met"
    else:
        bounds = shells.growth_bounds(m, cfg.delta, cfg.epsilon, len(J), cfg.depth)
        ok = all(s >= b for s, b in zip(sizes, bounds))
        if failed:
            status = "hypothesis-not-met"
        else:
            status = "pass" if ok else "fail"
        for ell, s in enumerate(sizes):
            row[f"min_size_{ell}"] = s
    row["status"] = status
    row["failed_hypotheses"] = ";".join(failed)
    return row, {"hypothesis_not_met": int(status == "hypothesis-not-met")}


def _bt_basis(cfg):
    if cfg.basis == "fourier":
        return restricted_inv.partial_fourier(cfg.bt_k, cfg.n)
    rng = np.random.default_rng(derive_trial_seed(cfg.master_seed, 0, "basis"))
    E = rng.standard_normal((cfg.n, cfg.bt_k))
    res = restricted_inv.spread_basis(E, max(1, math.floor(cfg.eta * cfg.n)), 64,
                                      derive_trial_seed(cfg.master_seed, 0, "spread"))
    U = res.basis if res.success else restricted_inv.orthonormal_basis(E)
    return U.T.copy()


def _bt(cfg, t, V):
    seed = derive_trial_seed(cfg.master_seed, t, "bt")
    s = restricted_inv.bt_trial(V, cfg.eta, cfg.rho, seed, cfg.bt_mode, cfg.c_tilde, cfg.C_cap, cfg.c_low)
    row = {"ell": s.ell, "|J|": int(s.J.size), "cond_norm": s.cond_norm,
           "cond_lower": s.cond_lower, "submatrix_smin": s.submatrix_smin}
    return row, {"success": int(s.success)}


def _stieltjes(cfg, t):
    seed, A = _sample(cfg, t)
    B = sampling.shift_and_scale(A, cfg.z, cfg.mode)
    sv = spectra.singular_values(B)
    row = {"seed": seed}
    diff = 0.0
    for u, w in enumerate(cfg.ws):
        closed = spectra.stieltjes(sv, w)
        direct = spectra.stieltjes_resolvent(B.values, w)
        row[f"m{u}_re"] = closed.real
        row[f"m{u}_im"] = closed.imag
        diff = max(diff, abs(closed - direct))
    row["max_abs_diff"] = diff
    lp = spectra.log_potential_report(B.values, cfg.T_marks, sv=sv)
    row["log_potential"] = lp.log_potential
    row["girko_diff"] = abs(spectra.log_abs_det(B.values) / cfg.n - lp.log_potential) \
        if not lp.singular else math.nan
    for T in cfg.T_marks:
        row[f"tail_{T!r}"] = lp.tail_integrals[float(T)]
    if cfg.L is not None:
        H = sampling.hybrid_gaussianize(B, cfg.L, cfg.dist.theta, cfg.gaussian_mean,
                                        derive_trial_seed(cfg.master_seed, t, "hybrid"))
        hs = spectra.singular_values(H)
        row["frozen_fraction"] = float(np.mean(H.frozen))
        row["hybrid_max_abs_diff"] = max(abs(spectra.stieltjes(hs, w) - spectra.stieltjes(sv, w))
                                         for w in cfg.ws)
    return row, {}


def _type_mass(cfg, t):
    seed, B, G, P, K = _graph_and_types(cfg, t)
    mass = types_chains.finite_type_mass(P, G)
    tail = graph.degree_tail_report(G, cfg.p * cfg.n)
    row = {
        "seed": seed,
        "K": K,
        "layers": len(P.layers),
        "finite": int(P.finite.size),
        "infinite": int(P.infinite.size),
        "closure_in": mass.count,
        "closure_fraction": mass.fraction,
        "degree_tail_constant": tail.constant,
        "self_balancing": int(types_chains.self_balancing_vertices(G, P).sum()),
    }
    return row, {}


def _event_probe(cfg, t):
    """Row events of the least singular direction plus column anticoncentration."""
    seed, A = _sample(cfg, t)
    B = sampling.shift_and_scale(A, cfg.z, cfg.mode)
    M = B.values
    _, s, Vh = np.linalg.svd(M)
    x = Vh[-1].conj()
    q = cfg.q if cfg.q is not None else max(1, min(cfg.n, math.floor(1.0 / cfg.p)))
    row = {"seed": seed, "s_min": float(s[-1]), "q": q}
    ev = spectra.row_event_diagnostic(M, x, q, cfg.tau, cfg.C_row, cfg.p, cfg.alpha)
    row["S"] = ev.S
    rng = np.random.default_rng(derive_trial_seed(cfg.master_seed, t, "normals"))
    _, inner = spectra.random_unit_normals(M, rng)
    row["min_inner"] = float(np.min(np.abs(inner)))
    row["median_inner"] = float(np.median(np.abs(inner)))
    # shell of the least singular direction, exempting rows of large l1 norm
    pn = cfg.p * cfg.n
    heavy = np.nonzero(np.abs(M).sum(axis=1) > cfg.C_row * pn)[0].tolist()
    centre = [int(np.argmax(np.abs(x)))]
    out = shells.build_shell_from_vector(M, x, heavy, centre, cfg.depth, cfg.alpha)
    row["shell_status"] = "ok" if out.ok else out.failure
    if out.ok:
        G = graph.build_graph(M, cfg.alpha)
        P = types_chains.classify_types(G, types_chains.canonical_k0(pn, cfg.alpha) / 2)
        row["infinite_type_hits"] = shells.infinite_type_hits(out.shell, P)
        # L chosen so that |M| <= n / sqrt(L)
        row["infinite_type_reference"] = shells.infinite_type_reference(
            out.shell, G, (cfg.n / max(len(heavy), 1)) ** 2)
    return row, {"shell_built": int(out.ok)}


PIPELINES = {
    "smin_survey": (_smin, ("sampling.sample_matrix", "sampling.shift_and_scale", "spectra.singular_values")),
    "esd_survey": (_esd, ("sampling.sample_matrix", "spectra.esd_metrics")),
    "chain_census": (_census, ("graph.build_graph", "types_chains.classify_types", "types_chains.chain_census")),
    "shell_growth": (_shell_growth, ("types_chains.classify_types", "shells.growth_hypotheses",
                                     "shells.minimal_layer_sizes")),
    "bt_success": (_bt, ("restricted_inv.sample_bt_subset", "restricted_inv.check_bt_conditions")),
    "stieltjes_compare": (_stieltjes, ("spectra.stieltjes", "spectra.stieltjes_resolvent",
                                       "spectra.log_potential_report", "sampling.hybrid_gaussianize")),
    "type_mass": (_type_mass, ("types_chains.classify_types", "types_chains.finite_type_mass",
                               "graph.degree_tail_report")),
    "event_probe": (_event_probe, ("spectra.row_event_diagnostic", "spectra.random_unit_normals",
                                   "shells.build_shell_from_vector")),
}

# fixed leading columns per kind; kinds with parameter-dependent columns add more
LEADING = {
    "smin_survey": ["trial", "seed", "s_min", "a3_satisfied"],
    "bt_success": ["trial", "ell", "|J|", "cond_norm", "cond_lower", "submatrix_smin"],
}


def _one(cfg, t, extra):
    try:
        return _call(cfg, t, extra), None
    except (LabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return ({}, {}), f"{type(exc).__name__}: {exc}"


def _call(cfg, t, extra):
    fn = PIPELINES[cfg.kind][0]
    return fn(cfg, t, extra) if extra is not None else fn(cfg, t)


def _quantiles(vals):
    a = np.asarray(vals, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        return None
    return {
        "mean": float(a.mean()),
        "median": float(np.median(a)),
        "q10": float(np.quantile(a, 0.1)),
        "q90": float(np.quantile(a, 0.9)),
        "min": float(a.min()),
        "max": float(a.max()),
    }


def aggregate(columns, rows):
    """Summary statistics per column: quantiles for numbers, Wilson intervals for flags."""
    out = {}
    for c in columns:
        if c == "trial" or c == "seed":
            continue
        vals = [r.get(c) for r in rows if r.get(c) is not None]
        if not vals or isinstance(vals[0], str):
            continue
        if all(isinstance(v, (bool, np.bool_)) for v in vals):
            k = sum(bool(v) for v in vals)
            lo, hi = restricted_inv.wilson_interval(k, len(vals))
            out[c] = {"frequency": k / len(vals), "wilson_low": lo, "wilson_high": hi, "count": len(vals)}
        else:
            q = _quantiles(vals)
            if q is not None:
                out[c] = q
    return out


def run_experiment(cfg, threads=1):
    """Run every trial of ``cfg`` and assemble the report in trial order."""
    start = time.perf_counter()
    extra = _bt_basis(cfg) if cfg.kind == "bt_success" else None
    trials = range(cfg.trials)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _one(cfg, t, extra), trials))
    else:
        results = [_one(cfg, t, extra) for t in trials]
    columns = list(LEADING.get(cfg.kind, ["trial"]))
    rows, errors, counters = [], {}, {}
    for t, ((row, cnt), err) in enumerate(results):
        full = {"trial": t}
        full.update(row)
        for c in full:
            if c not in columns:
                columns.append(c)
        rows.append(full)
        if err is not None:
            errors[t] = err
        for k, v in cnt.items():
            counters[k] = counters.get(k, 0) + v
    counters["errors"] = len(errors)
    rep = ExperimentReport(cfg, columns, rows, aggregate(columns, rows), counters, errors)
    if cfg.kind == "bt_success":
        wins = counters.get("success", 0)
        ell = next((r["ell"] for r in rows if "ell" in r), 0)
        lo, hi = restricted_inv.wilson_interval(wins, cfg.trials)
        rep.aggregates["success_rate"] = {"rate": wins / cfg.trials, "wilson_low": lo, "wilson_high": hi,
                                          "lower_ref": (cfg.c_hat * cfg.eta) ** ell}
    rep.wall_clock = time.perf_counter() - start
    return rep
