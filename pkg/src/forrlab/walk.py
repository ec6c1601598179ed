"""Polarizing Gaussian random walk whose sign-rounding realizes F_n.

Each step draws X_i ~ N(0, eps)^N (numpy's ziggurat ``standard_normal`` on
the supplied Generator, scaled by sqrt(eps)) and updates

    D     = 1 - |X|
    X    <- X + D * trnc(X_i)
    Y    <- trnc(Y + trnc_{1/2}(sqrt(eps) H (D * X_i)))

with H the normalized Hadamard.  Several independent walks can run as one
batch; arrays then have shape (runs, N) and every report field becomes a
per-run array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard as _sylvester

from . import runtime
from .boolfn import TruthTable, biased_signs, check_n, hadamard_apply, trnc
from .fordist import ForrelationPair, ForrelationParams

RESIDUAL_TOL = 1e-9
# below this size a dense matrix product beats the butterfly
DENSE_H_MAX = 1024


def _hadamard_op(N: int):
    if N > DENSE_H_MAX:
        return hadamard_apply
    Hm = _sylvester(N).astype(np.float64) / math.sqrt(N)
    return lambda v: v @ Hm


def default_steps(n: int, epsilon: float) -> int:
    return math.ceil(200 * math.log(2**n) / epsilon)


def fast_steps(n: int, epsilon: float) -> int:
    """Shortened smoke-test profile; m is a fifth of the default step count."""
    return math.ceil(40 * math.log(2**n) / epsilon)


@dataclass(frozen=True)
class WalkConfig:
    n: int
    epsilon: float | None = None
    m: int | None = None
    record_history: bool = False
    fast: bool = False

    def __post_init__(self):
        n = check_n(self.n)
        eps = 1.0 / (100 * n) if self.epsilon is None else float(self.epsilon)
        if not 0 < eps <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {eps}")
        if self.m is None:
            m = fast_steps(n, eps) if self.fast else default_steps(n, eps)
        else:
            m = int(self.m)
        if m < 0:
            raise ValueError("m must be nonnegative")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "m", m)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def params(self) -> ForrelationParams:
        return ForrelationParams(self.n, self.epsilon)


@dataclass
class WalkState:
    n: int
    epsilon: float
    X: np.ndarray
    Y: np.ndarray
    step: int = 0
    # clamp counters: "x_step" = trnc on X_i, "y_step" = trnc_{1/2}, "y_outer" = outer trnc
    clamps: dict = field(default_factory=dict)
    history: list | None = None

    @classmethod
    def initial(cls, config: WalkConfig, runs: int | None = None) -> "WalkState":
        shape = (config.N,) if runs is None else (runs, config.N)
        zero_counts = 0 if runs is None else np.zeros(runs, dtype=np.int64)
        clamps = {k: (zero_counts if runs is None else zero_counts.copy()) for k in ("x_step", "y_step", "y_outer")}
        return cls(
            config.n,
            config.epsilon,
            np.zeros(shape),
            np.zeros(shape),
            0,
            clamps,
            [] if config.record_history else None,
        )

    @property
    def batched(self) -> bool:
        return self.X.ndim == 2

    @property
    def clamps_fired(self):
        return self.clamps["x_step"] + self.clamps["y_step"] + self.clamps["y_outer"]


def _count(mask):
    return np.count_nonzero(mask, axis=-1)


def step_walk(state: WalkState, steps: int, rng: np.random.Generator, chunk: int = 256) -> WalkState:
    """Advance ``state`` in place by ``steps`` steps and return it.

    Gaussians are drawn ``chunk`` steps at a time; numpy fills them in the
    same order as one draw per step, so the chunk size does not change results.
    """
    sd = math.sqrt(state.epsilon)
    X, Y = state.X.copy(), state.Y.copy()
    had = _hadamard_op(X.shape[-1])
    buf = np.empty((min(chunk, max(steps, 1)),) + X.shape)
    D = np.empty_like(X)
    DXi = np.empty_like(X)
    done = 0
    while done < steps:
        k = min(buf.shape[0], steps - done)
        rng.standard_normal(out=buf[:k])
        buf[:k] *= sd
        for Xi in buf[:k]:
            np.abs(X, out=D)
            np.subtract(1.0, D, out=D)
            np.multiply(D, Xi, out=DXi)
            dY = had(DXi)
            dY *= sd
            if np.abs(Xi).max() > 1.0:
                tX = np.clip(Xi, -1.0, 1.0)
                state.clamps["x_step"] += _count(tX != Xi)
                X += D * tX
            else:
                X += DXi
            if np.abs(dY).max() > 0.5:
                tdY = np.clip(dY, -0.5, 0.5)
                state.clamps["y_step"] += _count(tdY != dY)
                Y += tdY
            else:
                Y += dY
            if np.abs(Y).max() > 1.0:
                state.clamps["y_outer"] += _count(np.abs(Y) > 1.0)
                np.clip(Y, -1.0, 1.0, out=Y)
            # exact arithmetic never leaves [-1, 1]; guard against rounding
            if np.abs(X).max() > 1.0:
                np.clip(X, -1.0, 1.0, out=X)
            state.step += 1
            if state.history is not None:
                state.history.append((X.copy(), Y.copy()))
        done += k
    state.X, state.Y = X, Y
    if not (np.all(np.abs(X) <= 1.0) and np.all(np.abs(Y) <= 1.0)):
        raise AssertionError("walk left the [-1, 1] box")
    return state


def run_walk(config: WalkConfig, rng: np.random.Generator, runs: int | None = None) -> WalkState:
    """Run ``config.m`` steps from X = Y = 0 (a batch of ``runs`` walks if given)."""
    return step_walk(WalkState.initial(config, runs), config.m, rng)


@dataclass(frozen=True)
class TruncationReport:
    linear_relation_holds: object
    y_in_half_box: object
    max_residual: object


def check_linear_relation(state: WalkState) -> TruncationReport:
    """Check Y = sqrt(eps) H X (max-norm residual < 1e-9) and Y in [-1/2, 1/2]^N."""
    predicted = math.sqrt(state.epsilon) * hadamard_apply(state.X)
    resid = np.max(np.abs(state.Y - predicted), axis=-1)
    half = np.all(np.abs(state.Y) <= 0.5, axis=-1)
    holds = resid < RESIDUAL_TOL
    if not state.batched:
        return TruncationReport(bool(holds), bool(half), float(resid))
    return TruncationReport(holds, half, resid)


@dataclass(frozen=True)
class PolarizationStats:
    min_abs: object
    mean_sq_deficit: object


def polarization_stats(state: WalkState) -> PolarizationStats:
    """min_j |X_j| and mean_j (1 - X_j^2)."""
    X = state.X
    mn = np.min(np.abs(X), axis=-1)
    def_ = np.mean(1.0 - X * X, axis=-1)
    if not state.batched:
        return PolarizationStats(float(mn), float(def_))
    return PolarizationStats(mn, def_)


def polarization_bound(m: int, epsilon: float) -> float:
    """3 exp(-m p / 16) with per-step second moment p = eps/2."""
    return 3.0 * math.exp(-m * (epsilon / 2.0) / 16.0)


def rounded_sign(X: np.ndarray) -> np.ndarray:
    """sgn with ties broken toward +1."""
    return np.where(X >= 0, 1, -1).astype(np.int8)


def rounding_bias(f_values: np.ndarray, epsilon: float) -> np.ndarray:
    """trnc(sqrt(eps) (H tt(f))_x), the per-coordinate bias of g."""
    return trnc(math.sqrt(epsilon) * hadamard_apply(f_values))


def round_walk_to_pair(state: WalkState, params: ForrelationParams, rng) -> ForrelationPair:
    """f = sgn(X), g drawn coordinate-wise with mean trnc(sqrt(eps) H tt(f))."""
    if state.batched:
        raise ValueError("round one walk at a time; use round_walk_batch for batches")
    if params.n != state.n:
        raise ValueError("params and walk disagree on n")
    fv = rounded_sign(state.X)
    g = biased_signs(rounding_bias(fv, params.epsilon), rng)
    return ForrelationPair(TruthTable(state.n, fv), TruthTable(state.n, g), params)


def round_walk_batch(state: WalkState, params: ForrelationParams, rng):
    """Batched rounding: returns (F, G) arrays of shape (runs, N)."""
    F = rounded_sign(state.X)
    G = biased_signs(rounding_bias(F, params.epsilon), rng)
    return F, G


@dataclass(frozen=True)
class WalkReport:
    n: int
    epsilon: float
    m: int
    seed: int
    runs: int
    linear_relation_holds: float
    max_residual: float
    min_abs: float
    mean_sq_deficit: float
    clamps_fired: int
    polarization_bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def walk_verify(config: WalkConfig, runs: int, seed: int, workers: int = 1, block: int = 200):
    """Run ``runs`` independent walks in fixed-size blocks; return (report, final states).

    ``linear_relation_holds`` in the report is the fraction of runs where the
    linear relation and the half-box condition both hold.
    """
    sizes = runtime.blocks(runs, block)
    rngs = runtime.split(runtime.make_rng(seed), len(sizes))
    states = runtime.pmap(lambda job: run_walk(config, job[1], runs=job[0]), list(zip(sizes, rngs)), workers)
    holds, resid, mins, defs, clamps = [], [], [], [], []
    for st in states:
        rep = check_linear_relation(st)
        pol = polarization_stats(st)
        holds.append(rep.linear_relation_holds & rep.y_in_half_box)
        resid.append(rep.max_residual)
        mins.append(pol.min_abs)
        defs.append(pol.mean_sq_deficit)
        clamps.append(st.clamps_fired)
    holds = np.concatenate(holds)
    report = WalkReport(
        n=config.n,
        epsilon=config.epsilon,
        m=config.m,
        seed=int(seed),
        runs=runs,
        linear_relation_holds=float(holds.mean()),
        max_residual=float(np.max(np.concatenate(resid))),
        min_abs=float(np.min(np.concatenate(mins))),
        mean_sq_deficit=float(np.mean(np.concatenate(defs))),
        clamps_fired=int(np.sum(np.concatenate(clamps))),
        polarization_bound=polarization_bound(config.m, config.epsilon),
    )
    return report, states
