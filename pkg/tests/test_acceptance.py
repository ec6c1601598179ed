"""End-to-end acceptance checks, one test per criterion, at the stated sizes and tolerances.

Each test records a PASS/FAIL line (also shown in the terminal summary) and
then asserts on it, so a criterion that is not met shows up as a failed test.
"""

import math
import subprocess
import sys
import time

import numpy as np
from scipy import stats as sps

from forrlab.boolfn import TruthTable, fwht_batch
from forrlab.cli import fourier_uniformity_scan
from forrlab.fordist import (
    ForrelationParams,
    conditional_bias,
    forr_stats,
    forrelation_value,
    forrelation_values,
    sample_forrelation_pair,
    sample_pairs,
)
from forrlab.games import (
    OverlapBruteForce,
    SwapTestAgainstKey,
    battery_scaling,
    brute_force_max_overlap,
    estimate_advantage,
    run_shifted_game,
    sample_challenge,
    swap_test,
)
from forrlab.hybrids import HybridParams, OracleSpec, build_ensemble, check_density_identity
from forrlab.qstate import (
    StateVector,
    apply_hadamard,
    apply_phase,
    density_from_ensemble,
    enumerate_phase_states,
    plus_state,
    sample_haar_batch,
)
from forrlab.recoracle import standard_demo
from forrlab.stats import ks_two_sample, two_proportion_pvalue
from forrlab.walk import WalkConfig, round_walk_batch, walk_verify


def test_c01_spectral_state_equivalence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for n in range(2, 11):
        params = ForrelationParams(n)
        for _ in range(100):
            p = sample_forrelation_pair(params, rng)
            s = apply_phase(apply_hadamard(apply_phase(plus_state(n), p.f)), p.g)
            sim = np.vdot(plus_state(n).amplitudes, s.amplitudes).real
            worst = max(worst, abs(sim - forrelation_value(p.f, p.g)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 10
    assert criterion(1, ok, f"max |delta| = {worst:.2e} over 900 pairs, {dt:.1f}s")


def test_c02_conditional_law(criterion):
    t0 = time.perf_counter()
    params = ForrelationParams(8)
    rng = np.random.default_rng(102)
    f = TruthTable(8, np.where(rng.random(256) < 0.5, 1, -1))
    bias = conditional_bias(f, params)
    T = 100_000
    total = np.zeros(256)
    for _ in range(T // 10_000):
        total += np.where(rng.random((10_000, 256)) < (1 + bias) / 2, 1, -1).sum(0)
    mean = total / T
    z = np.abs(mean - bias) / np.sqrt((1 - bias**2) / T)
    dt = time.perf_counter() - t0
    ok = z.max() < 4 and dt < 60
    assert criterion(2, ok, f"max z = {z.max():.2f} over 256 coordinates, {dt:.1f}s")


def test_c03_mean_forrelation(criterion):
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (6, 8, 10):
        params = ForrelationParams(n)
        st = forr_stats(params, 10_000, seed=103 + n)
        root = math.sqrt(params.epsilon)
        good = st.trunc_rate == 0.0 and st.ci_low <= root <= st.ci_high
        ok &= good
        parts.append(f"n={n}: {st.mean_forr:.4f} in [{st.ci_low:.4f}, {st.ci_high:.4f}] vs {root:.4f}, trunc {st.trunc_rate}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 60
    assert criterion(3, ok, "; ".join(parts) + f"; {dt:.1f}s")


def test_c04_exact_density_identity(criterion):
    t0 = time.perf_counter()
    worst_gap, worst_td, worst_diag, checked, ok = 0.0, 0.0, 0.0, 0, True
    for n in (4, 6, 8, 10):
        for kappa in (1, 2, 4, 6):
            if kappa >= n:
                continue
            params = ForrelationParams(n)
            rep = check_density_identity(build_ensemble(OracleSpec(104 + n + kappa, kappa, n)), params)
            if not rep.no_truncation:
                continue
            checked += 1
            worst_gap = max(worst_gap, rep.offdiag_max_gap)
            worst_td = max(worst_td, abs(rep.td - rep.tvd_diag))
            worst_diag = max(worst_diag, rep.diag_max_dev)
            ok &= rep.matches
    dt = time.perf_counter() - t0
    ok = ok and checked > 0 and worst_gap < 1e-10 and worst_diag == 0 and worst_td < 1e-8 and dt < 300
    assert criterion(4, ok, f"{checked} ensembles, off-diag gap {worst_gap:.1e}, |TD - TVD| {worst_td:.1e}, diag dev {worst_diag}, {dt:.1f}s")


def test_c05_fourier_square_scaling(criterion):
    t0 = time.perf_counter()
    rows, slope = fourier_uniformity_scan(10, list(range(2, 11)), 20, seed=105)
    dt = time.perf_counter() - t0
    ok = abs(slope + 0.5) <= 0.15 and dt < 600
    assert criterion(5, ok, f"slope {slope:.3f} over kappa 2..10 at n=10, {dt:.1f}s")


def test_c06_low_degree_scaling(criterion):
    t0 = time.perf_counter()
    sc, results = battery_scaling(list(range(6, 15)), 100_000, seed=106)
    dt = time.perf_counter() - t0
    ok = abs(sc.slope + 0.5) <= 0.15 and dt < 1800
    adv = ", ".join(f"{r.max_advantage:.2e}" for r in results)
    assert criterion(6, ok, f"slope {sc.slope:.3f} vs N over n=6..14 (max adv {adv}), {dt:.1f}s")


def _walk_moment_check(cfg, states, seed):
    """Bonferroni z-test of walk-rounded moments against direct samples of the same law."""
    rng = np.random.default_rng(seed)
    Fw, Gw = [], []
    for st in states:
        f, g = round_walk_batch(st, cfg.params, rng)
        Fw.append(f)
        Gw.append(g)
    Fw, Gw = np.concatenate(Fw).astype(float), np.concatenate(Gw).astype(float)
    Fd, Gd, Fh = sample_pairs(cfg.params, 20_000, rng)
    Fd, Gd = Fd.astype(float), Gd.astype(float)
    N = Fw.shape[1]
    pairs = rng.integers(0, N, size=(256, 2))

    def moments(F, G):
        cols = [F, G, F[:, pairs[:, 0]] * G[:, pairs[:, 1]], forrelation_values(G, fwht_batch(F))[:, None]]
        return np.concatenate(cols, axis=1)

    a, b = moments(Fw, Gw), moments(Fd, Gd)
    se = np.sqrt(a.var(0, ddof=1) / len(a) + b.var(0, ddof=1) / len(b))
    z = np.abs(a.mean(0) - b.mean(0)) / np.maximum(se, 1e-12)
    crit = sps.norm.ppf(1 - 0.005 / a.shape[1])
    return float(z.max()), float(crit)


def test_c07_walk_verification(criterion):
    t0 = time.perf_counter()
    parts, ok = [], True
    for cfg, label in ((WalkConfig(6), "full n=6"), (WalkConfig(8, fast=True), "fast n=8")):
        rep, states = walk_verify(cfg, 200, seed=107 + cfg.n)
        zmax, crit = _walk_moment_check(cfg, states, 207 + cfg.n)
        good = (
            rep.linear_relation_holds >= 0.99
            and rep.max_residual < 1e-9
            and rep.mean_sq_deficit <= rep.polarization_bound
            and zmax < crit
        )
        ok &= good
        parts.append(
            f"{label} m={rep.m}: holds {rep.linear_relation_holds:.3f}, resid {rep.max_residual:.1e}, "
            f"deficit {rep.mean_sq_deficit:.1e} <= {rep.polarization_bound:.1e}, moments z {zmax:.2f} < {crit:.2f}"
        )
    dt = time.perf_counter() - t0
    ok = ok and dt < 1800
    assert criterion(7, ok, "; ".join(parts) + f"; {dt:.1f}s")


def _challenge_stats(ch, rng):
    F, G = ch.f, ch.g
    forr = forrelation_values(G, fwht_batch(F))
    k, _ = brute_force_max_overlap(ch.state, ch)
    key0 = G[0] * fwht_batch(F[0])
    return (
        float(forr.max()),
        float(forr[k]),
        float(ch.state.amplitudes.sum().real),
        swap_test(ch.state, StateVector(ch.state.n, key0), rng),
    )


def test_c08_hybrid_identities(criterion):
    t0 = time.perf_counter()
    params = HybridParams(6, 3)
    rng = np.random.default_rng(108)
    T = 2000
    s0 = np.array([_challenge_stats(sample_challenge(0, params, rng), rng) for _ in range(T)])
    s1 = np.array([_challenge_stats(sample_challenge(1, params, rng), rng) for _ in range(T)])
    pvals = [ks_two_sample(s0[:, i], s1[:, i]) for i in range(3)]
    pvals.append(two_proportion_pvalue(int(s0[:, 3].sum()), T, int(s1[:, 3].sum()), T))
    same = min(pvals) > 0.01

    mix = density_from_ensemble(enumerate_phase_states(4)).entries
    exact_gap = float(np.max(np.abs(mix - np.eye(16) / 16)))
    haar = density_from_ensemble(sample_haar_batch(8, 10_000, rng)).entries
    haar_gap = float(np.max(np.abs(haar - np.eye(256) / 256)))
    dt = time.perf_counter() - t0
    ok = same and exact_gap < 1e-12 and haar_gap < 5e-3 and dt < 300
    ps = ", ".join(f"{p:.3f}" for p in pvals)
    assert criterion(8, ok, f"H0 vs H1 p-values [{ps}]; phase mixture gap {exact_gap:.1e}; Haar gap {haar_gap:.1e}; {dt:.1f}s")


def test_c09_computational_statistical_gap(criterion):
    t0 = time.perf_counter()
    params = HybridParams(10, 4)
    brute = estimate_advantage(OverlapBruteForce(), 0, 4, params, 500, np.random.default_rng(109))
    swap = SwapTestAgainstKey(0)
    pred = swap.predicted_advantage(10, 4)
    est = estimate_advantage(swap, 0, 4, params, 500, np.random.default_rng(209))
    null = estimate_advantage(swap, 4, 4, params, 500, np.random.default_rng(309))
    dt = time.perf_counter() - t0
    ok = brute.advantage >= 0.9 and est.consistent_with(pred) and null.consistent_with(0.0) and dt < 300
    assert criterion(
        9,
        ok,
        f"brute-force adv {brute.advantage:.3f}; swap adv {est.advantage:.3f} vs predicted {pred:.4f} "
        f"(+-{est.ci_halfwidth:.3f}); null {null.advantage:.3f}; {dt:.1f}s",
    )


def test_c10_shifted_forrelation_game(criterion):
    t0 = time.perf_counter()
    rep, _, _ = run_shifted_game(HybridParams(12, 4), 500, seed=110)
    dt = time.perf_counter() - t0
    ok = rep.classifier_error < 0.10 and rep.mean_rel_error <= 0.20 and dt < 600
    assert criterion(
        10,
        ok,
        f"classifier error {rep.classifier_error:.3f}; H_kappa mean {rep.hkappa_mean:.4f} vs sqrt(eps) {rep.sqrt_eps:.4f} "
        f"(rel err {rep.mean_rel_error:.2f}); uniform mean {rep.uniform_mean:.4f}; {dt:.1f}s",
    )


def test_c11_recursive_oracle_demo(criterion):
    t0 = time.perf_counter()
    rep = standard_demo(111, random_count=50)
    dt = time.perf_counter() - t0
    ok = rep.agreement == 1.0 and rep.machines >= 50 and rep.nested_cases >= 1 and rep.max_depth_seen >= 2 and dt < 60
    assert criterion(11, ok, f"{rep.agreements}/{rep.machines} agree, nested depth {rep.max_depth_seen}, {dt:.1f}s")


REPRO_ARGS = {
    "forr-stats": ["--n", "6", "--trials", "2000"],
    "walk-verify": ["--n", "4", "--trials", "20", "--fast"],
    "lemma55": ["--n", "7", "--kappa", "3"],
    "fourier-uniformity": ["--n", "7", "--kappa", "5", "--trials", "4"],
    "hybrid-advantage": ["--n", "6", "--kappa", "3", "--trials", "200", "--distinguisher", "swap-test"],
    "shifted-game": ["--n", "7", "--kappa", "3", "--trials", "100"],
    "lowdeg-battery": ["--n", "8", "--trials", "2000"],
    "oracle-demo": ["--trials", "10"],
}


def test_c12_reproducibility(criterion):
    from forrlab.cli import COMMANDS

    assert set(REPRO_ARGS) == set(COMMANDS)
    bad = []
    for cmd, args in REPRO_ARGS.items():
        for fmt in ("json", "csv"):
            outs = []
            for workers in ("1", "1", "4"):
                r = subprocess.run(
                    [sys.executable, "-m", "forrlab", cmd, *args, "--seed", "112", "--format", fmt, "--workers", workers],
                    capture_output=True,
                    check=False,
                )
                outs.append((r.returncode, r.stdout))
            if outs[0][0] != 0 or len(set(outs)) != 1 or not outs[0][1]:
                bad.append(f"{cmd}/{fmt}")
    ok = not bad
    assert criterion(12, ok, f"{len(REPRO_ARGS)} commands x 2 formats, runs (w=1, w=1, w=4) byte-identical" + (f"; mismatched: {bad}" if bad else ""))
