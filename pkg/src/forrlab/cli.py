"""Command-line experiment runner.

Every command is a pure function of its flags: the same flags and seed give
byte-identical output regardless of ``--workers``.  Any flag can also come from
an environment variable ``FORRLAB_<FLAG>`` (e.g. ``FORRLAB_WORKERS=4``);
explicit flags win.

Exit codes: 0 ok, 1 ``--check`` failed, 2 bad configuration, 3 size cap hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import fordist, games, hybrids, recoracle, walk
from .boolfn import CapError
from .runtime import atomic_write, make_rng, pmap
from .stats import loglog_slope

ENV_PREFIX = "FORRLAB_"


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    n: int | None = None
    kappa: int | None = None
    epsilon: float | None = None
    trials: int | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1
    fast: bool = False
    check: bool = False
    distinguisher: str = "overlap-bruteforce"
    hybrids: str = "0,4"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


class Result:
    """Rows for CSV, a document for JSON, and a pass flag for --check."""

    def __init__(self, rows, doc, passed: bool, fields=None):
        self.rows = rows
        self.doc = doc
        self.passed = passed
        self.fields = fields or (list(rows[0]) if rows else [])

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(_plain(self.doc), sort_keys=True, indent=2) + "\n"
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _plain(v) for k, v in r.items()})
        return buf.getvalue()


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _get(cfg, name, default):
    v = getattr(cfg, name)
    return default if v is None else v


# Commands


def cmd_forr_stats(cfg: ExperimentConfig) -> Result:
    params = fordist.ForrelationParams(_get(cfg, "n", 8), cfg.epsilon)
    st = fordist.forr_stats(params, _get(cfg, "trials", 10_000), cfg.seed, cfg.workers)
    row = st.row()
    row["sqrt_eps"] = math.sqrt(params.epsilon)
    ok = st.ci_low <= row["sqrt_eps"] <= st.ci_high
    return Result([row], row, ok, list(fordist.ForrStats.CSV_FIELDS) + ["sqrt_eps"])


def cmd_walk_verify(cfg: ExperimentConfig) -> Result:
    config = walk.WalkConfig(_get(cfg, "n", 6), cfg.epsilon, fast=cfg.fast)
    rep, _ = walk.walk_verify(config, _get(cfg, "trials", 200), cfg.seed, cfg.workers)
    d = rep.to_dict()
    ok = rep.linear_relation_holds >= 0.99 and rep.max_residual < walk.RESIDUAL_TOL and rep.mean_sq_deficit <= rep.polarization_bound
    return Result([d], d, ok)


def cmd_lemma55(cfg: ExperimentConfig) -> Result:
    n, kappa = _get(cfg, "n", 8), _get(cfg, "kappa", 4)
    oracle = hybrids.OracleSpec(cfg.seed, kappa, n)
    ens = hybrids.build_ensemble(oracle)
    rep = hybrids.check_density_identity(ens, fordist.ForrelationParams(n, cfg.epsilon))
    d = rep.to_dict()
    ok = rep.matches and abs(rep.tvd_diag - rep.tvd_formula) < 1e-8 and rep.diag_max_dev < 1e-15
    return Result([d], d, ok)


def fourier_uniformity_scan(n: int, kappas, seeds: int, seed: int, workers: int = 1):
    """Seed-averaged sum_i |2^-n - E_k f^_k(i)^2| per kappa; returns rows and the log2 slope."""
    masters = np.random.SeedSequence(seed).generate_state(seeds, np.uint64)
    jobs = [(k, int(s)) for k in kappas for s in masters]

    def one(job):
        k, s = job
        ens = hybrids.build_ensemble(hybrids.OracleSpec(s, k, n, require_stretch=False))
        return hybrids.fourier_square_uniformity(ens)

    vals = np.array(pmap(one, jobs, workers)).reshape(len(kappas), seeds)
    rows = [{"n": n, "kappa": k, "seeds": seeds, "mean_value": float(v.mean()), "seed": seed} for k, v in zip(kappas, vals)]
    slope = loglog_slope([2.0**k for k in kappas], [r["mean_value"] for r in rows])
    return rows, slope


def cmd_fourier_uniformity(cfg: ExperimentConfig) -> Result:
    n = _get(cfg, "n", 10)
    kmax = _get(cfg, "kappa", 10)
    if kmax < 2:
        raise ValueError("kappa (the largest key length scanned) must be >= 2")
    rows, slope = fourier_uniformity_scan(n, list(range(2, kmax + 1)), _get(cfg, "trials", 20), cfg.seed, cfg.workers)
    ok = abs(slope + 0.5) <= 0.15
    return Result(rows, {"rows": rows, "slope": slope, "n": n, "seed": cfg.seed}, ok)


DISTINGUISHERS = {
    "overlap-bruteforce": lambda: games.OverlapBruteForce(),
    "swap-test": lambda: games.SwapTestAgainstKey(0),
    "coin-flip": lambda: games.CoinFlip("coin-flip"),
}


def _hybrid_id(tok: str):
    tok = tok.strip()
    return "tau" if tok == "tau" else int(tok)


def cmd_hybrid_advantage(cfg: ExperimentConfig) -> Result:
    n, kappa = _get(cfg, "n", 10), _get(cfg, "kappa", 4)
    params = hybrids.HybridParams(n, kappa, cfg.epsilon)
    if cfg.distinguisher not in DISTINGUISHERS:
        raise ValueError(f"unknown distinguisher {cfg.distinguisher!r}")
    d = DISTINGUISHERS[cfg.distinguisher]()
    parts = cfg.hybrids.split(",")
    if len(parts) != 2:
        raise ValueError("--hybrids takes two ids, e.g. 0,4")
    ha, hb = (_hybrid_id(p) for p in parts)
    for h in (ha, hb):
        if h != "tau" and h not in hybrids.HYBRID_IDS:
            raise ValueError(f"unknown hybrid {h!r}")
    est = games.estimate_advantage(d, ha, hb, params, _get(cfg, "trials", 500), make_rng(cfg.seed), cfg.workers)
    row = games.advantage_row(est, d, ha, hb, params, cfg.seed)
    if isinstance(d, games.OverlapBruteForce):
        ok = est.advantage >= 0.9
    elif isinstance(d, games.SwapTestAgainstKey) and (ha, hb) == (0, 4):
        ok = est.consistent_with(d.predicted_advantage(n, kappa))
    else:
        ok = est.consistent_with(0.0)
    return Result([row], row, ok, list(games.CSV_FIELDS))


def cmd_shifted_game(cfg: ExperimentConfig) -> Result:
    params = hybrids.HybridParams(_get(cfg, "n", 12), _get(cfg, "kappa", 4), cfg.epsilon)
    rep, _, _ = games.run_shifted_game(params, _get(cfg, "trials", 500), cfg.seed, cfg.workers)
    d = rep.to_dict()
    ok = rep.classifier_error < 0.10 and rep.mean_rel_error <= 0.20
    return Result([d], d, ok)


def cmd_lowdeg_battery(cfg: ExperimentConfig) -> Result:
    nmax = _get(cfg, "n", 10)
    if nmax < 7:
        raise ValueError("--n (the largest n scanned) must be >= 7")
    ns = range(6, nmax + 1)
    sc, results = games.battery_scaling(ns, _get(cfg, "trials", 100_000), cfg.seed, workers=cfg.workers)
    rows = [
        {"n": r.n, "epsilon": r.epsilon, "trials": r.trials, "max_advantage": r.max_advantage, "ratio": r.ratio, "seed": cfg.seed}
        for r in results
    ]
    ok = abs(sc.slope + 0.5) <= 0.15
    return Result(rows, {"rows": rows, "slope": sc.slope, "tests": [r.to_dict() for r in results]}, ok)


def cmd_oracle_demo(cfg: ExperimentConfig) -> Result:
    rep = recoracle.standard_demo(cfg.seed, random_count=_get(cfg, "trials", 50))
    d = rep.to_dict()
    row = {k: v for k, v in d.items() if k != "failures"}
    return Result([row], d, rep.agreement == 1.0 and rep.machines >= 50)


COMMANDS = {
    "forr-stats": (cmd_forr_stats, "Mean forrelation over F_n with a 99% CI.", "n epsilon trials mean_forr ci_low ci_high trunc_rate seed sqrt_eps"),
    "walk-verify": (
        cmd_walk_verify,
        "Run the polarizing walk and check Y = sqrt(eps) H X, Y in [-1/2,1/2], and polarization.",
        "n epsilon m seed runs linear_relation_holds max_residual min_abs mean_sq_deficit clamps_fired polarization_bound",
    ),
    "lemma55": (
        cmd_lemma55,
        "Exact sigma_A vs tau_A comparison for a seeded keyed ensemble.",
        "n kappa epsilon seed no_truncation offdiag_max_gap diag_max_dev td tvd_diag tvd_formula matches",
    ),
    "fourier-uniformity": (
        cmd_fourier_uniformity,
        "Seed-averaged Fourier-square uniformity for kappa = 2..--kappa; --trials = seeds per kappa.",
        "n kappa seeds mean_value seed (JSON adds slope)",
    ),
    "hybrid-advantage": (
        cmd_hybrid_advantage,
        "Estimate a distinguisher's advantage between two hybrids.",
        "hybrid_a hybrid_b distinguisher n kappa trials p_a p_b advantage ci seed",
    ),
    "shifted-game": (
        cmd_shifted_game,
        "Honest max-forrelation statistic under H_kappa vs uniform h; --trials = games per side.",
        "n kappa epsilon games seed hkappa_mean uniform_mean sqrt_eps mean_rel_error classifier_error threshold",
    ),
    "lowdeg-battery": (
        cmd_lowdeg_battery,
        "Max advantage of 64 random quadratic tests (L_{1,2} = 4) for n = 6..--n.",
        "n epsilon trials max_advantage ratio seed (JSON adds slope and per-test values)",
    ),
    "oracle-demo": (
        cmd_oracle_demo,
        "Single-query B decisions vs brute-force witness search; --trials = random machines.",
        "seed machines agreements exhaustive_length exhaustive_wellformed random_machines nested_cases max_depth_seen agreement",
    ),
}


def _env(name, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return None
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forrlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_, fields) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_, epilog=f"output fields: {fields}")
        sp.add_argument("--n", type=int, default=_env("n", int))
        sp.add_argument("--kappa", type=int, default=_env("kappa", int))
        sp.add_argument("--epsilon", type=float, default=_env("epsilon", float), help="override eps = 1/(100 n)")
        sp.add_argument("--trials", type=int, default=_env("trials", int))
        seed_env = _env("seed", int)
        sp.add_argument("--seed", type=int, default=seed_env, required=seed_env is None)
        sp.add_argument("--out", default=_env("out"), help="output file (stdout if omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default=_env("format") or "json")
        sp.add_argument("--workers", type=int, default=_env("workers", int) or 1)
        sp.add_argument("--fast", action="store_true", default=bool(_env("fast", bool)))
        sp.add_argument("--check", action="store_true", default=bool(_env("check", bool)))
        if name == "hybrid-advantage":
            sp.add_argument("--distinguisher", choices=sorted(DISTINGUISHERS), default=_env("distinguisher") or "overlap-bruteforce")
            sp.add_argument("--hybrids", default=_env("hybrids") or "0,4", help="two hybrid ids (0-4 or tau)")
    return p


def run(cfg: ExperimentConfig) -> int:
    result = COMMANDS[cfg.command][0](cfg)
    text = result.render(cfg.format)
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        sys.stdout.write(text)
    if cfg.check:
        print(f"{cfg.command}: {'PASS' if result.passed else 'FAIL'}", file=sys.stderr)
        return 0 if result.passed else 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kw = {k: v for k, v in vars(args).items() if v is not None}
    try:
        cfg = ExperimentConfig(**kw)
        return run(cfg)
    except CapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
