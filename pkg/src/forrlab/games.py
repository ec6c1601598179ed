"""Distinguishers, advantage estimation, the shifted-Forrelation game and the
quadratic low-degree battery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import runtime
from .boolfn import fwht_batch, random_signs, trnc
from .fordist import ForrelationParams
from .hybrids import Challenge, HybridParams, KeyedEnsemble, sample_hybrid
from .qstate import StateVector
from .stats import loglog_slope, threshold_classifier_error

ALPHA = 0.01
CLASSES = ("overlap-bruteforce", "swap-test", "low-degree", "custom")


# Challenges


def sample_challenge(hybrid, params: HybridParams, rng) -> Challenge:
    """A distinguisher-facing challenge from H_0..H_4, or "tau": H_1 w.p. eps, else H_3."""
    if hybrid == "tau":
        eps = params.forrelation.epsilon
        hybrid = 1 if rng.random() < eps else 3
    return sample_hybrid(int(hybrid), params, rng).challenge()


# Distinguishers


class Distinguisher:
    label = "custom"

    def __init__(self, name: str | None = None):
        self.name = name or type(self).__name__

    def decide(self, challenge: Challenge, rng) -> int:
        raise NotImplementedError

    def __call__(self, challenge: Challenge, rng) -> int:
        return int(self.decide(challenge, rng))


class FunctionDistinguisher(Distinguisher):
    """Wrap a plain ``fn(challenge, rng) -> bit``."""

    def __init__(self, fn, name: str = "custom", label: str = "custom"):
        super().__init__(name)
        if label not in CLASSES:
            raise ValueError(f"unknown resource class {label!r}")
        self.fn = fn
        self.label = label

    def decide(self, challenge, rng):
        return self.fn(challenge, rng)


class CoinFlip(Distinguisher):
    def decide(self, challenge, rng):
        return int(rng.integers(2))


class OverlapBruteForce(Distinguisher):
    """Accept iff some key has |<phi_k|psi>| >= threshold (enumerates all keys)."""

    label = "overlap-bruteforce"

    def __init__(self, threshold: float = 0.5):
        super().__init__("overlap-bruteforce")
        self.threshold = threshold

    def decide(self, challenge, rng):
        _, value = brute_force_max_overlap(challenge.state, challenge)
        return int(value >= self.threshold)


class SwapTestAgainstKey(Distinguisher):
    """One swap test between the challenge state and |phi_key> rebuilt from the oracle."""

    label = "swap-test"

    def __init__(self, key: int = 0):
        super().__init__("swap-test")
        self.key = key

    def decide(self, challenge, rng):
        f = challenge.f[self.key]
        amp = challenge.g[self.key] * fwht_batch(f)
        return swap_test(StateVector(challenge.state.n, amp), challenge.state, rng)

    @staticmethod
    def predicted_advantage(n: int, kappa: int, hybrid_pair=(0, 4)) -> float:
        """Exact acceptance gap for (H_0, H_4): E|<phi_0|phi_k*>|^2 - E|<phi_0|haar>|^2, halved."""
        if tuple(hybrid_pair) != (0, 4):
            raise ValueError("prediction is implemented for (H0, H4) only")
        N, K = 1 << n, 1 << kappa
        # off-key overlaps of independent uniform oracles and Haar overlaps both average 1/N
        p0 = 0.5 * (1 + 1 / K + (1 - 1 / K) / N)
        p4 = 0.5 * (1 + 1 / N)
        return p0 - p4


def swap_test(a: StateVector, b: StateVector, rng) -> int:
    """1 with probability (1 + |<a|b>|^2)/2."""
    if a.n != b.n:
        raise ValueError(f"mismatched n: {a.n} vs {b.n}")
    ov = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return int(rng.random() < (1.0 + min(ov, 1.0)) / 2.0)


def brute_force_max_overlap(state: StateVector, ensemble) -> tuple[int, float]:
    """max_k |<phi_k|state>| by enumerating keys.

    ``ensemble`` is a KeyedEnsemble, a Challenge, or a (keys, 2^n) amplitude array.
    """
    if isinstance(ensemble, (KeyedEnsemble, Challenge)):
        amps = ensemble.states() if isinstance(ensemble, KeyedEnsemble) else ensemble.ensemble_states()
    else:
        amps = np.asarray(ensemble)
    if amps.shape[-1] != state.amplitudes.shape[0]:
        raise ValueError("state and ensemble disagree on n")
    vals = np.abs(amps.conj() @ state.amplitudes)
    k = int(np.argmax(vals))
    return k, float(vals[k])


# Advantage estimation


def ci_halfwidth(trials: int, alpha: float = ALPHA) -> float:
    """Hoeffding half-width for the difference of two frequencies over ``trials`` each."""
    return math.sqrt(math.log(2 / alpha) / (2 * trials)) * math.sqrt(2)


@dataclass(frozen=True)
class AdvantageEstimate:
    p_a: float
    p_b: float
    trials: int
    advantage: float = field(init=False)
    abs_advantage: float = field(init=False)
    ci_halfwidth: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "advantage", self.p_a - self.p_b)
        object.__setattr__(self, "abs_advantage", abs(self.p_a - self.p_b))
        object.__setattr__(self, "ci_halfwidth", ci_halfwidth(self.trials))

    def consistent_with(self, value: float) -> bool:
        return abs(self.advantage - value) <= self.ci_halfwidth


CSV_FIELDS = ("hybrid_a", "hybrid_b", "distinguisher", "n", "kappa", "trials", "p_a", "p_b", "advantage", "ci", "seed")


def advantage_row(est: AdvantageEstimate, d: Distinguisher, hybrid_a, hybrid_b, params: HybridParams, seed) -> dict:
    return {
        "hybrid_a": hybrid_a,
        "hybrid_b": hybrid_b,
        "distinguisher": d.name,
        "n": params.n,
        "kappa": params.kappa,
        "trials": est.trials,
        "p_a": est.p_a,
        "p_b": est.p_b,
        "advantage": est.advantage,
        "ci": est.ci_halfwidth,
        "seed": seed,
    }


def acceptance_bits(d: Distinguisher, hybrid, params: HybridParams, trials: int, rng, workers: int = 1) -> np.ndarray:
    """One fresh challenge and RNG stream per trial."""

    def one(r):
        return d(sample_challenge(hybrid, params, r), r)

    return np.array(runtime.pmap(one, runtime.split(rng, trials), workers), dtype=np.int8)


def estimate_advantage(d: Distinguisher, hybrid_a, hybrid_b, params: HybridParams, trials: int, rng, workers: int = 1):
    if trials < 100:
        raise ValueError("need at least 100 trials per side")
    ra, rb = runtime.split(runtime.make_rng(rng), 2)
    a = acceptance_bits(d, hybrid_a, params, trials, ra, workers)
    b = acceptance_bits(d, hybrid_b, params, trials, rb, workers)
    return AdvantageEstimate(float(a.mean()), float(b.mean()), trials)


# Shifted Forrelation


@dataclass(frozen=True)
class ShiftedGame:
    side: str
    h: np.ndarray = field(repr=False)
    statistic: float
    hidden: dict = field(default_factory=dict, repr=False)


def shifted_statistic(f: np.ndarray, g: np.ndarray, h: np.ndarray) -> float:
    """max_k |forr(f_k, g_k . h)| over an oracle given as (keys, 2^n) tables."""
    vals = np.einsum("kx,kx->k", (g * h).astype(np.float64), fwht_batch(f)) / math.sqrt(f.shape[-1])
    return float(np.max(np.abs(vals)))


def shifted_forrelation_game(params: HybridParams, side: str, rng) -> ShiftedGame:
    """Draw a uniform oracle (f_k, g_k) and a challenge h from H_kappa or uniformly."""
    K, N = params.keys, 1 << params.n
    f = random_signs((K, N), rng)
    g_tab = random_signs((K, N), rng)
    if side == "hkappa":
        fp = params.forrelation
        k = int(rng.integers(K))
        bias = trnc(fp.scale * fwht_batch(f[k]))
        g = np.where(rng.random(N) < (1 + bias) / 2, 1, -1).astype(np.int8)
        h = (g_tab[k] * g).astype(np.int8)
        hidden = {"k": k, "g": g}
    elif side == "uniform":
        h = random_signs(N, rng)
        hidden = {}
    else:
        raise ValueError(f"side must be 'hkappa' or 'uniform', got {side!r}")
    return ShiftedGame(side, h, shifted_statistic(f, g_tab, h), hidden)


def shifted_statistic_from_hybrid(params: HybridParams, rng) -> float:
    """The same statistic with h and the oracle taken from an H_2 sample."""
    s = sample_hybrid(2, params, rng)
    return shifted_statistic(s.f, s.g, s.hidden["h"])


@dataclass(frozen=True)
class ShiftedGameReport:
    n: int
    kappa: int
    epsilon: float
    games: int
    seed: int
    hkappa_mean: float
    uniform_mean: float
    sqrt_eps: float
    mean_rel_error: float
    classifier_error: float
    threshold: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_shifted_game(params: HybridParams, games: int, seed: int, workers: int = 1):
    """Play ``games`` rounds per side; returns (report, hkappa stats, uniform stats)."""
    rh, ru = runtime.split(runtime.make_rng(seed), 2)

    def side_stats(side, rng):
        return np.array(
            runtime.pmap(lambda r: shifted_forrelation_game(params, side, r).statistic, runtime.split(rng, games), workers)
        )

    hk = side_stats("hkappa", rh)
    un = side_stats("uniform", ru)
    err, thr = threshold_classifier_error(hk, un)
    eps = params.forrelation.epsilon
    report = ShiftedGameReport(
        n=params.n,
        kappa=params.kappa,
        epsilon=eps,
        games=games,
        seed=int(seed),
        hkappa_mean=float(hk.mean()),
        uniform_mean=float(un.mean()),
        sqrt_eps=math.sqrt(eps),
        mean_rel_error=float(abs(hk.mean() - math.sqrt(eps)) / math.sqrt(eps)),
        classifier_error=float(err),
        threshold=float(thr),
    )
    return report, hk, un


# Low-degree battery


@dataclass(frozen=True, eq=False)
class QuadraticTest:
    """C(z) = constant + sum_i lin_i z_i + sum_(a,b) c_ab z_a z_b over z = (tt(f), tt(g)).

    Coordinates 0..2^n-1 index f, 2^n..2^(n+1)-1 index g.
    """

    n: int
    pairs: np.ndarray
    coeffs: np.ndarray
    constant: float = 0.0
    lin_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    lin_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if pairs.shape[0] != coeffs.shape[0]:
            raise ValueError("one coefficient per pair")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("quadratic terms must use two distinct coordinates (multilinear)")
        if np.any(pairs < 0) or np.any(pairs >= self.width):
            raise ValueError("coordinate out of range")
        object.__setattr__(self, "pairs", np.sort(pairs, axis=1))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "lin_idx", np.asarray(self.lin_idx, dtype=np.int64))
        object.__setattr__(self, "lin_coeffs", np.asarray(self.lin_coeffs, dtype=np.float64))

    @property
    def width(self) -> int:
        return 2 << self.n

    @property
    def L12(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        out = self.constant + z[..., self.lin_idx] @ self.lin_coeffs
        return out + (z[..., self.pairs[:, 0]] * z[..., self.pairs[:, 1]]) @ self.coeffs

    def uniform_expectation(self) -> float:
        """Exact: every nonconstant monomial averages to 0 under uniform inputs."""
        return float(self.constant)

    def involves_g(self):
        N = 1 << self.n
        return self.pairs[:, 1] >= N, self.lin_idx >= N

    @classmethod
    def constant_test(cls, n: int, value: float = 1.0) -> "QuadraticTest":
        return cls(n, np.zeros((0, 2)), np.zeros(0), constant=value)

    @classmethod
    def product_test(cls, n: int, x: int, y: int, coeff: float = 1.0) -> "QuadraticTest":
        """C = coeff * f(x) g(y)."""
        return cls(n, [[x, (1 << n) + y]], [coeff])


def random_battery(n: int, rng, count: int = 64, pairs: int = 16, t: float = 4.0) -> list[QuadraticTest]:
    """``count`` tests on ``pairs`` random distinct coordinate pairs, signs random, L_{1,2} = t exactly."""
    width = 2 << n
    pairs = min(pairs, width * (width - 1) // 2)
    tests = []
    for _ in range(count):
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < pairs:
            a, b = rng.choice(width, size=2, replace=False)
            chosen.add((int(min(a, b)), int(max(a, b))))
        mags = rng.random(pairs) + 0.1
        signs = np.where(rng.random(pairs) < 0.5, -1.0, 1.0)
        coeffs = signs * mags * (t / mags.sum())
        tests.append(QuadraticTest(n, sorted(chosen), coeffs))
    return tests


@dataclass(frozen=True)
class LowDegreeResult:
    n: int
    epsilon: float
    trials: int
    method: str
    advantages: np.ndarray = field(repr=False)
    ci: np.ndarray = field(repr=False)
    max_advantage: float
    t: float
    ratio: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "method": self.method,
            "advantages": [float(a) for a in self.advantages],
            "ci": [float(c) for c in self.ci],
            "max_advantage": self.max_advantage,
            "t": self.t,
            "ratio": self.ratio,
        }


def _stack_battery(battery):
    pairs = np.concatenate([c.pairs for c in battery])
    owner = np.concatenate([np.full(len(c.coeffs), i) for i, c in enumerate(battery)])
    coeffs = np.concatenate([c.coeffs for c in battery])
    W = np.zeros((len(pairs), len(battery)))
    W[np.arange(len(pairs)), owner] = coeffs
    lin = np.concatenate([c.lin_idx for c in battery]) if battery else np.zeros(0, dtype=np.int64)
    lown = np.concatenate([np.full(len(c.lin_idx), i) for i, c in enumerate(battery)])
    L = np.zeros((len(lin), len(battery)))
    L[np.arange(len(lin)), lown] = np.concatenate([c.lin_coeffs for c in battery])
    return pairs, W, lin, L


def low_degree_advantage(
    battery, n: int, trials: int, rng, epsilon=None, method: str = "conditional", chunk: int | None = None, workers: int = 1
) -> LowDegreeResult:
    """Per-test |E_{F_n}[C] - E_unif[C]| with a 99% normal CI.

    ``method="conditional"`` averages E[C | f] over sampled f.  Given f the g
    coordinates are independent with means trnc(sqrt(eps 2^n) f^), so E[C | f]
    is C evaluated at (tt(f), those means).  Monomials in f alone have the same
    law under both distributions (f is uniform in F_n) and cancel exactly, so
    they are left out of the difference.  ``method="sampled"`` draws (f, g)
    from F_n and (f, g) uniformly and compares raw sample means.
    """
    battery = list(battery)
    if not battery:
        raise ValueError("battery must be nonempty")
    if any(c.n != n for c in battery):
        raise ValueError("every test must be over the same n")
    if method not in ("conditional", "sampled"):
        raise ValueError(f"unknown method {method!r}")
    params = ForrelationParams(n, epsilon)
    N = params.N
    pairs, W, lin, L = _stack_battery(battery)
    if method == "conditional":
        keep = pairs[:, 1] >= N
        pairs, W = pairs[keep], W[keep]
        lkeep = lin >= N
        lin, L = lin[lkeep], L[lkeep]
    chunk = chunk or max(1, min(4096, (1 << 23) // N))
    sizes = runtime.blocks(trials, chunk)
    rngs = runtime.split(runtime.make_rng(rng), len(sizes))

    def values(Z):
        return (Z[:, pairs[:, 0]] * Z[:, pairs[:, 1]]) @ W + Z[:, lin] @ L

    def one(job):
        size, r = job
        F = random_signs((size, N), r)
        M = trnc(params.scale * fwht_batch(F))
        if method == "conditional":
            Z = np.concatenate([F.astype(np.float64), M], axis=1)
            v = values(Z)
            return v.sum(0), (v * v).sum(0)
        G = np.where(r.random((size, N)) < (1 + M) / 2, 1.0, -1.0)
        v = values(np.concatenate([F.astype(np.float64), G], axis=1))
        u = values(random_signs((size, 2 * N), r).astype(np.float64))
        d = np.stack([v, u])
        return d.sum(1), (d * d).sum(1)

    parts = runtime.pmap(one, list(zip(sizes, rngs)), workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean**2, 0.0) * trials / max(trials - 1, 1)
    z = 2.5758293035489004
    if method == "conditional":
        adv = np.abs(mean)
        ci = z * np.sqrt(var / trials)
    else:
        adv = np.abs(mean[0] - mean[1])
        ci = z * np.sqrt((var[0] + var[1]) / trials)
    t = max(c.L12 for c in battery)
    bound = t * math.log(N) / math.sqrt(N)
    mx = float(adv.max())
    return LowDegreeResult(n, params.epsilon, trials, method, adv, ci, mx, t, mx / bound if bound else 0.0)


@dataclass(frozen=True)
class BatteryScaling:
    ns: tuple
    max_advantages: tuple
    slope: float
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "ns": list(self.ns),
            "max_advantages": list(self.max_advantages),
            "slope": self.slope,
            "trials": self.trials,
            "seed": self.seed,
        }


def battery_scaling(ns, trials: int, seed: int, count: int = 64, t: float = 4.0, workers: int = 1, method="conditional"):
    """Max battery advantage per n, plus the log-log slope against N."""
    ns = tuple(ns)
    rngs = runtime.split(runtime.make_rng(seed), len(ns))
    results = []
    for n, r in zip(ns, rngs):
        rb, rs = runtime.split(r, 2)
        battery = random_battery(n, rb, count=count, t=t)
        results.append(low_degree_advantage(battery, n, trials, rs, method=method, workers=workers))
    mx = tuple(r.max_advantage for r in results)
    slope = loglog_slope([1 << n for n in ns], mx)
    return BatteryScaling(ns, mx, slope, trials, int(seed)), results
