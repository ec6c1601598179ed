"""The discrete Forrelation distribution F_n.

f is uniform; given f, each g(x) is +1 with probability
(1 + trnc(sqrt(eps 2^n) f^(x)))/2, independently over x.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import runtime
from .boolfn import (
    TruthTable,
    biased_signs,
    check_n,
    fwht,
    fwht_batch,
    random_signs,
    sample_biased_fn,
    sample_uniform_fn,
    trnc,
)
from .stats import normal_ci

_PAIR_MAGIC = b"FP"
_PAIR_VERSION = 1


@dataclass(frozen=True)
class ForrelationParams:
    n: int
    epsilon: float | None = None

    def __post_init__(self):
        n = check_n(self.n)
        eps = 1.0 / (100 * n) if self.epsilon is None else float(self.epsilon)
        if not 0 < eps <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {eps}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "epsilon", eps)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def scale(self) -> float:
        """sqrt(eps 2^n), the factor multiplying f^(x) inside the bias."""
        return math.sqrt(self.epsilon * self.N)

    @property
    def threshold(self) -> float:
        """|f^(x)| above this value makes the truncation fire."""
        return 1.0 / self.scale


@dataclass(frozen=True)
class ForrelationPair:
    f: TruthTable
    g: TruthTable
    params: ForrelationParams

    def __post_init__(self):
        if not (self.f.n == self.g.n == self.params.n):
            raise ValueError("f, g and params must share n")

    def to_bytes(self) -> bytes:
        head = _PAIR_MAGIC + struct.pack("<BBd", _PAIR_VERSION, self.params.n, self.params.epsilon)
        return head + self.f.to_bytes() + self.g.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ForrelationPair":
        if data[:2] != _PAIR_MAGIC:
            raise ValueError("not a Forrelation pair record")
        version, n, eps = struct.unpack("<BBd", data[2:12])
        if version != _PAIR_VERSION:
            raise ValueError(f"unsupported pair version {version}")
        f, rest = TruthTable.read_record(data[12:])
        g, rest = TruthTable.read_record(rest)
        if rest:
            raise ValueError("trailing bytes after pair record")
        return cls(f, g, ForrelationParams(n, eps))


def conditional_bias(f: TruthTable, params: ForrelationParams) -> np.ndarray:
    """E[g(x) | f] = trnc(sqrt(eps 2^n) f^(x)) for every x."""
    if f.n != params.n:
        raise ValueError("f and params disagree on n")
    return trnc(params.scale * fwht(f).coeffs)


def sample_conditional_g(f: TruthTable, params: ForrelationParams, rng) -> TruthTable:
    return sample_biased_fn(conditional_bias(f, params), rng)


def sample_forrelation_pair(params: ForrelationParams, rng) -> ForrelationPair:
    f = sample_uniform_fn(params.n, rng)
    return ForrelationPair(f, sample_conditional_g(f, params, rng), params)


def forrelation_value(f: TruthTable, g: TruthTable) -> float:
    """<+^n| U_g H U_f |+^n> = 2^{-n/2} sum_x g(x) f^(x)."""
    if f.n != g.n:
        raise ValueError(f"mismatched n: {f.n} vs {g.n}")
    return float(np.dot(g.values, fwht(f).coeffs) / math.sqrt(f.size))


# Batched forms: rows are functions.


def sample_pairs(params: ForrelationParams, count: int, rng):
    """Return (F, G, Fhat) arrays of shape (count, 2^n)."""
    F = random_signs((count, params.N), rng)
    Fhat = fwht_batch(F)
    G = biased_signs(trnc(params.scale * Fhat), rng)
    return F, G, Fhat


def forrelation_values(G: np.ndarray, Fhat: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", G.astype(np.float64), Fhat) / math.sqrt(Fhat.shape[-1])


def truncation_mask(Fhat: np.ndarray, params: ForrelationParams) -> np.ndarray:
    """Per-coordinate flag |f^(x)| > 1/sqrt(eps 2^n)."""
    return np.abs(Fhat) > params.threshold


@dataclass(frozen=True)
class TruncationStats:
    rate: float
    per_coordinate_rate: float
    hoeffding_bound: float
    trials: int


def truncation_stats(params: ForrelationParams, trials: int, rng, chunk: int = 4096) -> TruncationStats:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    any_hits = 0
    coord_hits = 0
    for size in runtime.blocks(trials, chunk):
        Fhat = fwht_batch(random_signs((size, params.N), rng))
        mask = truncation_mask(Fhat, params)
        any_hits += int(mask.any(axis=1).sum())
        coord_hits += int(mask.sum())
    return TruncationStats(
        rate=any_hits / trials,
        per_coordinate_rate=coord_hits / (trials * params.N),
        hoeffding_bound=min(1.0, 2.0 * math.exp(-1.0 / (2.0 * params.epsilon))),
        trials=trials,
    )


def truncation_event_rate(params: ForrelationParams, trials: int, rng) -> float:
    """Fraction of uniform f having some |f^(x)| above the truncation threshold."""
    return truncation_stats(params, trials, rng).rate


def exact_truncation_rate(params: ForrelationParams) -> float:
    """Enumerate all 2^(2^n) functions (n <= 4)."""
    if params.n > 4:
        raise ValueError("exhaustive enumeration is limited to n <= 4")
    N = params.N
    idx = np.arange(1 << N, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(N - 1, -1, -1)) & 1
    Fhat = fwht_batch(1 - 2 * bits)
    return float(truncation_mask(Fhat, params).any(axis=1).mean())


@dataclass(frozen=True)
class ForrStats:
    n: int
    epsilon: float
    trials: int
    mean_forr: float
    ci_low: float
    ci_high: float
    trunc_rate: float
    seed: int

    CSV_FIELDS = ("n", "epsilon", "trials", "mean_forr", "ci_low", "ci_high", "trunc_rate", "seed")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def forr_stats(params: ForrelationParams, trials: int, seed: int, workers: int = 1, block: int = 1000) -> ForrStats:
    """Monte Carlo mean forrelation over F_n with a 99% CI and truncation logging."""
    sizes = runtime.blocks(trials, block)
    rngs = runtime.split(runtime.make_rng(seed), len(sizes))

    def one(job):
        size, rng = job
        _, G, Fhat = sample_pairs(params, size, rng)
        return forrelation_values(G, Fhat), truncation_mask(Fhat, params).any(axis=1)

    parts = runtime.pmap(one, zip(sizes, rngs), workers)
    values = np.concatenate([p[0] for p in parts])
    trunc = np.concatenate([p[1] for p in parts])
    mean, lo, hi = normal_ci(values, 0.99)
    return ForrStats(params.n, params.epsilon, trials, mean, lo, hi, float(trunc.mean()), int(seed))
