"""Keyed 2-Forrelation state ensemble, the single-copy hybrids H0..H4, and the
exact density-matrix formulas for rho_A, sigma_A and tau_A.

The random oracle A is replaced by a keyed block function in counter mode:
Philox-4x64 with a key derived from ``master_seed``.  The table of
f_k^i = A(., k, i) is the first 2^n output bits of the stream whose 256-bit
counter starts at (i << 192) | (k << 128), so every (x, k, i) bit is fixed by
the seed alone and can be regenerated on demand.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boolfn import CapError, TruthTable, check_n, fwht_batch, random_signs, trnc
from .fordist import ForrelationParams
from .qstate import (
    DENSE_MAX_N,
    DensityMatrix,
    StateVector,
    density_from_ensemble,
    sample_haar,
    t_forrelation_state,
    trace_distance,
    tvd,
)
from .runtime import atomic_write

MAX_KAPPA = 16
HYBRID_IDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class OracleSpec:
    master_seed: int
    kappa: int
    n: int
    t: int = 2
    # kappa + 1 <= n is required for the PRS statement; statistics-only runs may lift it
    require_stretch: bool = True

    def __post_init__(self):
        check_n(self.n)
        if not 0 <= self.kappa <= MAX_KAPPA:
            raise CapError(f"kappa must lie in 0..{MAX_KAPPA}, got {self.kappa}")
        if self.require_stretch and self.kappa + 1 > self.n:
            raise ValueError(f"need kappa + 1 <= n, got kappa={self.kappa}, n={self.n}")
        if self.t < 1:
            raise ValueError("t must be >= 1")

    @property
    def keys(self) -> int:
        return 1 << self.kappa

    @property
    def N(self) -> int:
        return 1 << self.n

    def _key(self) -> np.ndarray:
        return np.random.SeedSequence(self.master_seed).generate_state(2, np.uint64)

    def table(self, k: int, i: int) -> np.ndarray:
        """+1/-1 values of f_k^i; layer index i runs over 1..t."""
        if not 0 <= k < self.keys:
            raise ValueError(f"key {k} out of range for kappa={self.kappa}")
        if not 1 <= i <= self.t:
            raise ValueError(f"layer {i} out of range 1..{self.t}")
        bg = np.random.Philox(key=self._key(), counter=(i << 192) | (k << 128))
        words = bg.random_raw(max(1, self.N // 64)).astype("<u8")
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")[: self.N]
        return (1 - 2 * bits.astype(np.int8)).astype(np.int8)

    def bit(self, x: int, k: int, i: int) -> int:
        return int(self.table(k, i)[x])

    def manifest(self) -> dict:
        return {"seed": self.master_seed, "kappa": self.kappa, "n": self.n, "t": self.t}


class KeyedEnsemble:
    """Lazily materialized {|phi_k>} over an :class:`OracleSpec`."""

    def __init__(self, oracle: OracleSpec):
        self.oracle = oracle
        self._tables: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()
        self._arrays: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.oracle.n

    @property
    def keys(self) -> int:
        return self.oracle.keys

    def layer(self, k: int, i: int) -> TruthTable:
        key = (k, i)
        tab = self._tables.get(key)
        if tab is None:
            tab = self.oracle.table(k, i)
            with self._lock:
                tab = self._tables.setdefault(key, tab)
        return TruthTable(self.n, tab)

    def f(self, k: int) -> TruthTable:
        return self.layer(k, 1)

    def g(self, k: int) -> TruthTable:
        return self.layer(k, 2)

    def state(self, k: int) -> StateVector:
        return t_forrelation_state([self.layer(k, i) for i in range(1, self.oracle.t + 1)])

    def layer_array(self, i: int) -> np.ndarray:
        """(2^kappa, 2^n) int8 array of f_k^i for all keys."""
        arr = self._arrays.get(i)
        if arr is None:
            arr = np.stack([self.layer(k, i).values for k in range(self.keys)])
            arr.setflags(write=False)
            with self._lock:
                arr = self._arrays.setdefault(i, arr)
        return arr

    @property
    def F(self) -> np.ndarray:
        return self.layer_array(1)

    @property
    def G(self) -> np.ndarray:
        return self.layer_array(2)

    @property
    def Fhat(self) -> np.ndarray:
        arr = self._arrays.get(-1)
        if arr is None:
            arr = fwht_batch(self.F)
            arr.setflags(write=False)
            self._arrays[-1] = arr
        return arr

    def states(self) -> np.ndarray:
        """(2^kappa, 2^n) real amplitudes of every |phi_k>."""
        if self.oracle.t == 2:
            # <x|U_g H U_f|+^n> = g(x) f^(x)
            return self.G * self.Fhat
        return np.stack([self.state(k).amplitudes for k in range(self.keys)])

    def dump(self, directory) -> None:
        """Per-key truth-table records plus a JSON manifest."""
        d = Path(directory)
        blob = b"".join(self.layer(k, i).to_bytes() for k in range(self.keys) for i in range(1, self.oracle.t + 1))
        atomic_write(d / "tables.bin", blob)
        atomic_write(d / "manifest.json", json.dumps(self.oracle.manifest(), sort_keys=True) + "\n")


def build_ensemble(oracle: OracleSpec) -> KeyedEnsemble:
    return KeyedEnsemble(oracle)


def load_ensemble_tables(directory) -> tuple[dict, list[TruthTable]]:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    data = (d / "tables.bin").read_bytes()
    tables = []
    while data:
        tt, data = TruthTable.read_record(data)
        tables.append(tt)
    return manifest, tables


# Hybrids


@dataclass(frozen=True)
class HybridParams:
    n: int
    kappa: int
    epsilon: float | None = None

    def __post_init__(self):
        check_n(self.n)
        if not 0 <= self.kappa <= MAX_KAPPA:
            raise CapError(f"kappa must lie in 0..{MAX_KAPPA}")
        if self.kappa + 1 > self.n:
            raise ValueError(f"need kappa + 1 <= n, got kappa={self.kappa}, n={self.n}")

    @property
    def forrelation(self) -> ForrelationParams:
        return ForrelationParams(self.n, self.epsilon)

    @property
    def keys(self) -> int:
        return 1 << self.kappa


@dataclass(frozen=True)
class Challenge:
    """What a distinguisher sees: one state copy and read access to the oracle tables."""

    state: StateVector
    f: np.ndarray
    g: np.ndarray

    def fhat(self) -> np.ndarray:
        return fwht_batch(self.f)

    def ensemble_states(self) -> np.ndarray:
        return self.g * self.fhat()


@dataclass(frozen=True)
class HybridSample:
    hybrid_id: int
    state: StateVector
    f: np.ndarray
    g: np.ndarray
    hidden: dict = field(repr=False)

    def challenge(self) -> Challenge:
        return Challenge(self.state, self.f, self.g)


def _forrelated(params: ForrelationParams, rng):
    f = random_signs(params.N, rng)
    bias = trnc(params.scale * fwht_batch(f))
    g = np.where(rng.random(params.N) < (1 + bias) / 2, 1, -1).astype(np.int8)
    return f, g


def sample_hybrid(hybrid_id: int, params: HybridParams, rng) -> HybridSample:
    """Draw one (state, oracle) security challenge from hybrid H_{hybrid_id}."""
    if hybrid_id not in HYBRID_IDS:
        raise ValueError(f"hybrid id must be one of {HYBRID_IDS}, got {hybrid_id!r}")
    K, N, n = params.keys, 1 << params.n, params.n
    if hybrid_id in (0, 4):
        f = random_signs((K, N), rng)
        g = random_signs((K, N), rng)
        if hybrid_id == 4:
            return HybridSample(4, sample_haar(n, rng), f, g, {})
        k_star = int(rng.integers(K))
        amp = g[k_star] * fwht_batch(f[k_star])
        return HybridSample(0, StateVector(n, amp), f, g, {"k_star": k_star})

    k_star = int(rng.integers(K))
    f_p = random_signs((K, N), rng)
    g_p = random_signs((K, N), rng)
    if hybrid_id in (1, 2):
        f_p[k_star], g_p[k_star] = _forrelated(params.forrelation, rng)
    h = random_signs(N, rng)
    f = f_p
    g = g_p * h
    hidden = {"k_star": k_star, "h": h, "f_prime": f_p, "g_prime": g_p}
    if hybrid_id == 1:
        amp = g[k_star] * fwht_batch(f[k_star])
    else:
        amp = h / math.sqrt(N)
    return HybridSample(hybrid_id, StateVector(n, amp), f, g, hidden)


# Exact average states


def _dense_check(ens: KeyedEnsemble):
    if ens.n > DENSE_MAX_N:
        raise CapError(f"dense density matrices are capped at n={DENSE_MAX_N}")


def rho_A(ens: KeyedEnsemble) -> DensityMatrix:
    """<i|rho_A|j> = E_k[g_k(i) g_k(j) f_k^(i) f_k^(j)]."""
    _dense_check(ens)
    V = ens.G * ens.Fhat
    return DensityMatrix(ens.n, V.T @ V / ens.keys)


def rho_A_from_states(ens: KeyedEnsemble) -> DensityMatrix:
    """The same average built by simulating every |phi_k> explicitly."""
    _dense_check(ens)
    return density_from_ensemble([ens.state(k) for k in range(ens.keys)])


def sigma_A(ens: KeyedEnsemble, params: ForrelationParams) -> DensityMatrix:
    """Average of |Phi_h><Phi_h| given A, with h = g_{k*} g and g ~ F_n | f = f_{k*}.

    Off-diagonal: E_k[g_k(i) g_k(j) b_k(i) b_k(j)] / 2^n with
    b_k = trnc(sqrt(eps 2^n) f_k^); diagonal: exactly 1/2^n.
    """
    _dense_check(ens)
    if params.n != ens.n:
        raise ValueError("params and ensemble disagree on n")
    W = ens.G * trnc(params.scale * ens.Fhat)
    N = 1 << ens.n
    S = W.T @ W / (ens.keys * N)
    np.fill_diagonal(S, 1.0 / N)
    return DensityMatrix(ens.n, S)


def sigma_A_monte_carlo(ens: KeyedEnsemble, params: ForrelationParams, samples: int, rng, chunk: int = 2048):
    """Sample-average of |Phi_h><Phi_h| under H2 with the oracle fixed; returns (mean, std-error) matrices."""
    _dense_check(ens)
    N = 1 << ens.n
    bias = trnc(params.scale * ens.Fhat)
    acc = np.zeros((N, N))
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        ks = rng.integers(ens.keys, size=size)
        u = rng.random((size, N))
        g = np.where(u < (1 + bias[ks]) / 2, 1.0, -1.0)
        h = ens.G[ks] * g
        acc += h.T @ h
        done += size
    mean = acc / (samples * N)
    # entries of |Phi_h><Phi_h| are +-1/N, so the second moment is constant
    var = np.maximum(1.0 / N**2 - mean**2, 0.0)
    return mean, np.sqrt(var / samples)


def tau_A(ens: KeyedEnsemble, params: ForrelationParams) -> DensityMatrix:
    """eps rho_A + (1 - eps) I / 2^n."""
    rho = rho_A(ens).entries
    N = 1 << ens.n
    eps = params.epsilon
    return DensityMatrix(ens.n, eps * rho + (1.0 - eps) * np.eye(N) / N)


def fourier_square_uniformity(ens: KeyedEnsemble) -> float:
    """sum_i |2^-n - E_k f_k^(i)^2|."""
    N = 1 << ens.n
    return float(np.abs(1.0 / N - np.mean(ens.Fhat**2, axis=0)).sum())


@dataclass(frozen=True)
class DensityIdentityReport:
    n: int
    kappa: int
    epsilon: float
    seed: int
    no_truncation: bool
    offdiag_max_gap: float
    diag_max_dev: float
    td: float
    tvd_diag: float
    tvd_formula: float
    matches: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_density_identity(ens: KeyedEnsemble, params: ForrelationParams) -> DensityIdentityReport:
    """Compare sigma_A against tau_A entrywise and in trace distance."""
    N = 1 << ens.n
    rho = rho_A(ens)
    sig = sigma_A(ens, params)
    tau = tau_A(ens, params)
    eps = params.epsilon
    off = ~np.eye(N, dtype=bool)
    gap = float(np.max(np.abs(sig.entries - eps * rho.entries)[off])) if N > 1 else 0.0
    no_trunc = bool(np.max(np.abs(ens.Fhat)) <= params.threshold)
    td = trace_distance(sig, tau)
    tvd_diag = tvd(sig.diagonal(), tau.diagonal())
    tvd_formula = eps / 2.0 * fourier_square_uniformity(ens)
    diag_dev = float(np.max(np.abs(sig.diagonal() - 1.0 / N)))
    matches = no_trunc and gap < 1e-10 and abs(td - tvd_diag) < 1e-8
    return DensityIdentityReport(
        n=ens.n,
        kappa=ens.oracle.kappa,
        epsilon=eps,
        seed=ens.oracle.master_seed,
        no_truncation=no_trunc,
        offdiag_max_gap=gap,
        diag_max_dev=diag_dev,
        td=td,
        tvd_diag=tvd_diag,
        tvd_formula=tvd_formula,
        matches=bool(matches),
    )
