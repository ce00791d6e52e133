"""Acceptance checks: exact verification of the deterministic statements and
desk-scale statistical checks of the limit laws.

Each check returns ``(passed, detail)``; :func:`run_checks` times them and
prints one line per check.  ``quick=True`` shrinks instance counts for the
self-test command; the acceptance suite always runs the full sizes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import compression, graph, restricted_inv, sampling, shells, spectra, types_chains
from .experiments import load_config, rows_csv, run_experiment
from .sampling import EntryDistribution, derive_trial_seed

MASTER = 20240611


def _rng(tag, t=0):
    return np.random.default_rng(derive_trial_seed(MASTER, t, tag))


def _count(full, quick, small):
    return small if quick else full


# 1-4: spectral identities


def _well_conditioned(rng, n):
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    return G + (2.0 + rng.uniform(0, 1)) * np.eye(n)


def check_negative_second_moment(quick=False):
    rng = _rng("negsec")
    worst = 0.0
    for _ in range(_count(200, quick, 20)):
        n = int(rng.integers(2, 101))
        cd = spectra.column_distances(_well_conditioned(rng, n))
        worst = max(worst, cd.negsec_relative)
    return worst <= 1e-8, f"max relative gap {worst:.3g}"


def _sparse_shifted(rng, n, p=None):
    p = p if p is not None else float(rng.uniform(0.05, 0.6))
    A = sampling.sample_matrix(n, p, 2.0, EntryDistribution.rademacher(), int(rng.integers(0, 2**63)))
    z = complex(rng.uniform(-1.5, 1.5), rng.uniform(0.6, 1.5))
    return sampling.shift_and_scale(A, z, "raw")


def check_hermitization(quick=False):
    rng = _rng("hermitize")
    worst = 0.0
    for _ in range(_count(100, quick, 10)):
        n = int(rng.integers(1, 129))
        B = _sparse_shifted(rng, n)
        ev = np.linalg.eigvalsh(spectra.hermitize(B))
        s = spectra.singular_values(B)
        ref = np.sort(np.concatenate([s, -s]))
        worst = max(worst, float(np.max(np.abs(np.sort(ev) - ref))))
    return worst <= 1e-9, f"max eigenvalue mismatch {worst:.3g}"


def check_girko(quick=False):
    rng = _rng("girko")
    worst = 0.0
    done = 0
    while done < _count(100, quick, 10):
        n = int(rng.integers(1, 65))
        B = _sparse_shifted(rng, n)
        lp = spectra.log_potential_report(B)
        if lp.singular:
            continue
        worst = max(worst, abs(spectra.log_abs_det(B) / n - lp.log_potential))
        done += 1
    return worst <= 1e-9, f"max gap {worst:.3g}"


def check_stieltjes(quick=False):
    rng = _rng("stieltjes")
    worst = 0.0
    for _ in range(_count(50, quick, 10)):
        n = int(rng.integers(1, 65))
        B = _sparse_shifted(rng, n)
        w = complex(rng.uniform(-3, 3), rng.uniform(0.1, 3))
        s = spectra.singular_values(B)
        worst = max(worst, abs(spectra.stieltjes(s, w) - spectra.stieltjes_resolvent(B, w)))
    return worst <= 1e-9, f"max gap {worst:.3g}"


# 5-6: vertex types


def _random_pattern(rng, n_left, m, density=None):
    """Matrix with entries 0, small (0.5) or large (2), read with alpha = 1."""
    density = density if density is not None else float(rng.uniform(0.1, 0.7))
    nz = rng.random((n_left, m)) < density
    big = rng.random((n_left, m)) < 0.6
    return np.where(nz, np.where(big, 2.0, 0.5), 0.0)


def oracle_types(B, alpha, K):
    """Round-by-round type evaluation from the raw matrix, using plain sets."""
    n_left, m = B.shape
    ins = [{i for i in range(n_left) if B[i, j] != 0} for j in range(m)]
    outs = [{i for i in range(n_left) if abs(B[i, j]) >= 1.0 / alpha} for j in range(m)]
    level = {}
    ell = 0
    while True:
        ell += 1
        covered = set()
        for j in level:
            covered |= ins[j]
        new = [j for j in range(m) if j not in level and len(outs[j] - covered) <= K]
        if not new:
            break
        for j in new:
            level[j] = ell
    return [level.get(j, 0) for j in range(m)]


def check_type_oracle(quick=False):
    rng = _rng("types")
    bad = 0
    for _ in range(_count(1000, quick, 100)):
        m = int(rng.integers(1, 9))
        n_left = int(rng.integers(1, 10))
        B = _random_pattern(rng, n_left, m)
        K = float(rng.choice([0, 0.5, 1, 2, 3]))
        P = types_chains.classify_types(graph.build_graph(B, 1.0, rectangular=True), K)
        if P.assignment.tolist() != oracle_types(B, 1.0, K):
            bad += 1
    return bad == 0, f"{bad} disagreements"


def check_hereditary(quick=False):
    rng = _rng("hereditary")
    bad = 0
    for _ in range(_count(500, quick, 50)):
        m = int(rng.integers(1, 11))
        n_left = int(rng.integers(1, 12))
        G = graph.build_graph(_random_pattern(rng, n_left, m), 1.0, rectangular=True)
        K = float(rng.choice([0, 0.5, 1, 2, 3]))
        I = [j for j in range(m) if rng.random() < 0.4]
        P = types_chains.classify_types(G, K)
        Q = types_chains.classify_types(graph.remove_right(G, I), K)
        parent = P.layer_sets()
        for ell, layer in enumerate(Q.layer_sets(), 1):
            allowed = set().union(*parent[:ell]) if parent else set()
            if not layer <= allowed:
                bad += 1
                break
    return bad == 0, f"{bad} inclusion failures"


# 7: compressions


def _square_pattern(rng, n):
    B = _random_pattern(rng, n, n, float(rng.uniform(0.1, 0.5)))
    np.fill_diagonal(B, 2.0)
    return B


def _chain_sets(enum):
    return enum.vertex_tuples()


def check_compression(quick=False):
    rng = _rng("compression")
    problems = []
    glued = 0
    for t in range(_count(200, quick, 30)):
        n = int(rng.integers(2, 9))
        B = _square_pattern(rng, n)
        G = graph.build_graph(B, 1.0)
        K = float(rng.choice([0, 0.5, 1, 2]))
        P = types_chains.classify_types(G, K)
        phi = compression.random_admissible_map(G, P, rng)
        glued += bool(phi.glued_pairs)
        if not compression.validate_map(phi, G, P).admissible:
            problems.append((t, "validate"))
            continue
        res = compression.apply_compression(B, phi, 1.0)
        Gphi = res.graph
        if Gphi.edge_sets() != compression.compress_graph(G, phi).edge_sets():
            problems.append((t, "graph"))
        Pphi = types_chains.classify_types(Gphi, K)
        if not np.array_equal(Pphi.assignment, P.assignment):
            problems.append((t, "types"))
        if not np.array_equal(Gphi.in_degree, G.in_degree):
            problems.append((t, "in-degree"))
        finite = P.assignment != types_chains.INFINITE
        sb = types_chains.self_balancing_vertices(G, P)
        sb_phi = types_chains.self_balancing_vertices(Gphi, Pphi)
        for k in range(1, 5):
            plain = _chain_sets(types_chains.enumerate_chains(G, k))
            phic = _chain_sets(compression.enumerate_phi_chains(Gphi, phi, k))
            if not plain <= phic:
                problems.append((t, f"chains->phi k={k}"))
            avoid = {c for c in phic if all(finite[v] for v in c)}
            if not avoid <= plain:
                problems.append((t, f"phi->chains k={k}"))
            for kind in ("cycle_free", "cyclic"):
                a = {c for c in plain if types_chains.chain_kind(c) == kind and all(sb[v] for v in c)}
                b = {c for c in phic if types_chains.chain_kind(c) == kind and all(sb_phi[v] for v in c)}
                if a != b:
                    problems.append((t, f"self-balancing {kind} k={k}"))
    return not problems, f"{glued} maps with glued pairs; problems {problems[:5]}"


# 8-9: shells


def _null_instance(rng):
    n = int(rng.integers(4, 65))
    density = float(rng.uniform(0.05, 0.4))
    mask = rng.random((n, n)) < density
    mags = rng.uniform(0.1, 3.0, (n, n)) * rng.choice([-1.0, 1.0], (n, n))
    if rng.random() < 0.5:
        mags = mags * np.exp(2j * np.pi * rng.random((n, n)))
    B = np.where(mask, mags, 0)
    x = np.exp(-rng.uniform(0, 6, n)) * rng.choice([-1.0, 1.0], n)
    x[rng.random(n) < 0.2] = 0.0
    if not np.any(x):
        x[0] = 1.0
    B = B.astype(complex)
    for i in range(n):
        supp = np.nonzero(B[i])[0]
        supp = supp[x[supp] != 0]
        if supp.size == 0:
            continue
        c = supp[np.argmax(np.abs(x[supp]))]
        rest = B[i] @ x - B[i, c] * x[c]
        B[i, c] = -rest / x[c]
    M = [int(i) for i in rng.choice(n, size=int(rng.integers(0, n // 8 + 1)), replace=False)]
    nzx = np.nonzero(x)[0]
    J = rng.choice(nzx, size=int(min(nzx.size, rng.integers(1, 4))), replace=False)
    return B, x, M, [int(j) for j in J], int(rng.integers(1, 4)), float(rng.choice([1.0, 2.0, 4.0]))


def check_shell_order_statistics(quick=False):
    rng = _rng("shells")
    verified = 0
    bad = []
    for t in range(_count(500, quick, 50)):
        B, x, M, J, d, alpha = _null_instance(rng)
        out = shells.build_shell_from_vector(B, x, M, J, d, alpha)
        if out.failure == "hypothesis":
            continue
        verified += 1
        if not out.ok:
            bad.append((t, out.failure))
            continue
        G = graph.build_graph(B, alpha)
        if not shells.validate_shell(out.shell, G).valid:
            bad.append((t, "invalid shell"))
        grow = 2 * alpha * out.L
        for q, layer in enumerate(out.shell.layers):
            if not layer:
                continue
            value = shells.order_stat_profile(x, [len(layer)])[0]
            if value < out.base / grow**q:
                bad.append((t, f"layer {q}"))
    return not bad and verified > 0, f"{verified} instances verified the hypothesis; failures {bad[:5]}"


def _expanding_instance(rng, m):
    """Column 0 shares one row with each other column; all other rows are private.

    With ``delta m = 2`` only pairs enter the expansion hypothesis, which
    tolerates one shared row once ``2 epsilon K >= 1``.
    """
    K = 17.0
    rows = []
    for j in range(1, m):
        r = np.zeros(m)
        r[0], r[j] = 2.0, 0.5
        rows.append(r)
    exempt = []
    for _ in range(int(K) + 1 - (m - 1)):
        r = np.zeros(m)
        r[0] = 2.0
        exempt.append(len(rows))
        rows.append(r)
    for j in range(1, m):
        for _ in range(int(K) + 1):
            r = np.zeros(m)
            r[j] = 2.0
            rows.append(r)
    return np.array(rows), K, exempt


def check_shell_growth(quick=False):
    rng = _rng("growth")
    eps = 1.0 / 33
    held = with_shell = 0
    bad = []
    for t in range(_count(100, quick, 12)):
        m = int(rng.integers(8, 17))
        if t % 4 == 3:
            B, K, M = _expanding_instance(rng, m)
            delta, depth, J = 2.0 / m, 1, [0]
        else:
            B = _random_pattern(rng, int(rng.integers(m, 3 * m)), m, float(rng.uniform(0.05, 0.3)))
            K = float(rng.choice([1, 2, 3]))
            delta, depth, M = float(rng.choice([0.25, 0.5, 1.0])), 2, []
            J = None
        G = graph.build_graph(B, 1.0, rectangular=True)
        P = types_chains.classify_types(G, K)
        if J is None:
            size = max(1, math.floor(delta * m / 2))
            if P.infinite.size == 0:
                continue
            J = sorted(rng.choice(P.infinite, size=min(size, P.infinite.size), replace=False).tolist())
        failed, exhaustive = shells.growth_hypotheses(G, P, K, eps, delta, J, frozenset(M), 16)
        if failed or not exhaustive:
            continue
        held += 1
        sizes = shells.minimal_layer_sizes(G, frozenset(M), J, depth)
        if sizes is None:
            continue
        with_shell += 1
        bounds = shells.growth_bounds(m, delta, eps, len(J), depth)
        if any(s < b for s, b in zip(sizes, bounds)):
            bad.append((t, sizes, bounds))
    detail = f"hypotheses held in {held} instances, {with_shell} admitted a shell; counterexamples {bad[:3]}"
    return not bad, detail


# 10: projection distances


def check_projection_bound(quick=False):
    rng = _rng("projection")
    asserted = 0
    bad = []
    for t in range(_count(500, quick, 50)):
        n = int(rng.integers(6, 41))
        k = int(rng.integers(2, max(3, n // 2)))
        eta = float(rng.choice([0.25, 0.5]))
        if rng.random() < 0.5:
            V = restricted_inv.partial_fourier(k, n, int(rng.integers(0, n)))
            rho = 1.0
        else:
            Q, _ = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
            V = Q.T
            r = max(1, math.floor(eta * n))
            rho = math.sqrt(n) * min(restricted_inv.order_stat(row, r) for row in V)
        ell = int(rng.integers(1, k + 1))
        J = np.sort(rng.choice(n, size=ell, replace=False))
        P = V.T @ V.conj()
        B0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        noise = float(rng.choice([0.0, 1e-6, 1e-3, 1e-1, 1.0]))
        B = B0 @ (np.eye(n) - P) + noise * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        if noise == 0.0 and rng.random() < 0.2:
            B = np.zeros((n, n))
        s = float(np.linalg.norm(B @ V.T, 2)) * float(rng.choice([1.0, 1.5]))
        if s == 0.0:
            s = 1e-12
        v = restricted_inv.projection_bound_check(B, V, J, eta, rho, s, c_low=0.05)
        if v.status == "hypothesis-not-met":
            continue
        asserted += 1
        if v.status != "pass":
            bad.append((t, v.count, v.ell))
    return not bad and asserted > 0, f"{asserted} instances with verified hypotheses; failures {bad[:5]}"


# 11-14: desk-scale statistics


def check_circular_law(quick=False):
    n, trials = (300, 2) if quick else (1000, 5)
    p = 20.0 / n
    radii = (0.3, 0.5, 0.8)
    worst_cdf = worst_mom = 0.0
    for t in range(trials):
        A = sampling.sample_matrix(n, p, 1.0, EntryDistribution.rademacher(), derive_trial_seed(MASTER, t, "esd"))
        met = spectra.esd_metrics(sampling.shift_and_scale(A, 0, "girko").values, radii)
        worst_cdf = max(worst_cdf, max(abs(met.radial_cdf[r] - spectra.disc_cdf(r)) for r in radii))
        worst_mom = max(worst_mom, abs(met.second_abs_moment - spectra.DISC_SECOND_MOMENT))
    ok = worst_cdf <= 0.05 and worst_mom <= 0.1
    return ok, f"max cdf gap {worst_cdf:.4f}, max moment gap {worst_mom:.4f}"


def check_smin(quick=False):
    n, trials = (200, 10) if quick else (500, 50)
    p = 10.0 / n if quick else 0.02
    positive = 0
    smins = []
    for t in range(trials):
        A = sampling.sample_matrix(n, p, 2.0, EntryDistribution.rademacher(), derive_trial_seed(MASTER, t, "smin"))
        s = spectra.singular_values(sampling.shift_and_scale(A, 1j, "raw"))[-1]
        smins.append(s)
        positive += s > 1e-10
    need = math.ceil(0.9 * trials)
    return positive >= need, f"{positive}/{trials} positive, median s_min {np.median(smins):.3g}"


def check_census(quick=False):
    n, trials = (500, 5) if quick else (2000, 20)
    pn, alpha = 10.0, 2.0
    p = pn / n
    K = types_chains.canonical_k0(pn, alpha) / 2
    k_max = max(1, math.floor(math.log(n) / math.log(pn) + 1e-12))
    found = False
    counts = []
    for t in range(trials):
        A = sampling.sample_matrix(n, p, alpha, EntryDistribution.rademacher(), derive_trial_seed(MASTER, t, "census"))
        B = sampling.shift_and_scale(A, 1j, "raw")
        G = graph.build_graph(B.values, alpha)
        P = types_chains.classify_types(G, K)
        cen = types_chains.chain_census(G, P, k_max)
        found |= cen.any_self_balancing_cyclic
        counts.append([r.self_balancing_cf for r in cen.rows])
    med = np.median(np.array(counts), axis=0)
    mono = all(med[i + 1] <= med[i] for i in range(len(med) - 1))
    return (not found) and mono, f"k_max {k_max}, median |I_k| {med.tolist()}, cyclic found {found}"


def check_bt(quick=False):
    k, n, eta, rho = 50, 500, 0.5, 1.0
    trials = 200 if quick else 2000
    c_tilde, C_cap, c_low = 1.0, 16.0, 0.05
    V = restricted_inv.partial_fourier(k, n)
    rate = restricted_inv.bt_success_rate(V, eta, rho, trials, MASTER, "uniform", c_tilde, C_cap=C_cap, c_low=c_low)
    mismatched = 0
    for s in rate.samples:
        if not s.success:
            continue
        cols = V[:, s.J]
        norms_ok = all(math.sqrt(sum(abs(v) ** 2 for v in cols[:, u])) <= math.sqrt(C_cap * k / (eta * n))
                       for u in range(cols.shape[1]))
        gram_min = float(np.linalg.eigvalsh(cols.conj().T @ cols)[0])
        lower_ok = math.sqrt(max(gram_min, 0.0)) >= c_low * rho * math.sqrt(eta * k / n)
        if not (len(s.J) == s.ell and norms_ok and lower_ok):
            mismatched += 1
    ok = rate.rate > 0 and mismatched == 0
    return ok, f"ell {rate.samples[0].ell}, rate {rate.rate:.4f} ({rate.successes}/{trials}), re-verification mismatches {mismatched}"


# 15: reproducibility

REPRO_CONFIGS = {
    "smin_survey": "n=30 p=0.2 alpha=2 z=0+1i trials=4",
    "esd_survey": "n=40 p=0.3 alpha=1 trials=3",
    "chain_census": "n=60 p=0.08 alpha=2 z=0+1i trials=3 K_factor=0.5",
    "shell_growth": "n=10 p=0.3 alpha=2 z=0+1i trials=4 K=1 epsilon=0.03 delta=0.5",
    "bt_success": "n=64 bt_k=16 eta=0.5 rho=1 c_tilde=1 trials=20",
    "stieltjes_compare": "n=20 p=0.3 alpha=2 z=0.5+1i trials=3 L=0.5",
    "type_mass": "n=50 p=0.1 alpha=2 z=0+1i trials=3",
    "event_probe": "n=30 p=0.2 alpha=2 z=0+1i trials=3 tau=1",
}


def check_reproducibility(quick=False):
    diffs = []
    for kind, body in REPRO_CONFIGS.items():
        cfg = load_config(f"kind={kind} master_seed=7 {body}")
        a = rows_csv(run_experiment(cfg, threads=1))
        b = rows_csv(run_experiment(cfg, threads=1))
        c = rows_csv(run_experiment(cfg, threads=4))
        if not (a == b == c):
            diffs.append(kind)
    return not diffs, f"{len(REPRO_CONFIGS)} kinds, differing: {diffs}"


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float


CHECKS = [
    (1, "negative second moment identity", check_negative_second_moment, 30),
    (2, "hermitization spectrum", check_hermitization, 60),
    (3, "girko log-determinant identity", check_girko, 10),
    (4, "stieltjes closed form vs resolvent", check_stieltjes, 10),
    (5, "type classification oracle", check_type_oracle, 10),
    (6, "hereditary type property", check_hereditary, 10),
    (7, "compression invariants", check_compression, 60),
    (8, "shell order statistics", check_shell_order_statistics, 30),
    (9, "shell growth", check_shell_growth, 60),
    (10, "projection distance bound", check_projection_bound, 60),
    (11, "circular law at desk scale", check_circular_law, 300),
    (12, "smallest singular value positivity", check_smin, 600),
    (13, "self-balancing chain census", check_census, 600),
    (14, "restricted invertibility success", check_bt, 300),
    (15, "reproducibility", check_reproducibility, 300),
]
DETERMINISTIC = tuple(range(1, 11))


def run_check(number, quick=False):
    num, name, fn, limit = CHECKS[number - 1]
    start = time.perf_counter()
    passed, detail = fn(quick=quick)
    elapsed = time.perf_counter() - start
    timely = quick or elapsed <= limit
    if not timely:
        detail += f"; exceeded {limit} s"
    return CheckResult(num, name, bool(passed and timely), detail, elapsed, limit)


def run_checks(numbers=None, quick=False, echo=print):
    numbers = [c[0] for c in CHECKS] if numbers is None else list(numbers)
    out = []
    for num in numbers:
        r = run_check(num, quick)
        if echo is not None:
            echo(f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d} {r.name}: {r.detail} ({r.seconds:.1f} s)")
        out.append(r)
    return out
