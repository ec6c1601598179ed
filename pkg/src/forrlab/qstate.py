"""Dense statevector and density-matrix simulation of phase and Forrelation states."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .boolfn import MAX_N, CapError, TruthTable, check_n, hadamard_apply

DENSE_MAX_N = 12
NORM_TOL = 1e-10
PSD_CLAMP = 1e-9

_SV_MAGIC = b"QS"
_DM_MAGIC = b"QD"


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = check_n(self.n, MAX_N)
        amp = np.asarray(self.amplitudes)
        if amp.shape != (1 << n,):
            raise ValueError(f"state for n={n} needs {1 << n} amplitudes, got {amp.shape}")
        amp = amp.astype(np.complex128 if np.iscomplexobj(amp) else np.float64)
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {norm!r})")
        amp.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.amplitudes)

    def to_bytes(self) -> bytes:
        data = self.amplitudes.astype(np.complex128).astype("<c16")
        return _SV_MAGIC + struct.pack("<B", self.n) + data.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "StateVector":
        if data[:2] != _SV_MAGIC:
            raise ValueError("not a statevector record")
        (n,) = struct.unpack("<B", data[2:3])
        amp = np.frombuffer(data[3:], dtype="<c16")
        if amp.size != 1 << n:
            raise ValueError("statevector record has wrong length")
        if not np.any(amp.imag):
            amp = amp.real
        return cls(n, amp.copy())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = check_n(self.n, DENSE_MAX_N)
        rho = np.asarray(self.entries)
        N = 1 << n
        if rho.shape != (N, N):
            raise ValueError(f"density matrix for n={n} needs shape {(N, N)}, got {rho.shape}")
        rho = rho.astype(np.complex128 if np.iscomplexobj(rho) else np.float64)
        if np.max(np.abs(rho - rho.conj().T)) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
        rho.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "entries", rho)

    def eigenvalues(self) -> np.ndarray:
        w = np.linalg.eigvalsh(self.entries)
        if w.min() < -PSD_CLAMP:
            raise ValueError(f"density matrix has negative eigenvalue {w.min()!r}")
        return np.where(w < 0, 0.0, w)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        N = 1 << check_n(n, DENSE_MAX_N)
        return cls(n, np.eye(N) / N)

    def to_bytes(self) -> bytes:
        data = self.entries.astype(np.complex128).astype("<c16")
        return _DM_MAGIC + struct.pack("<B", self.n) + data.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DensityMatrix":
        if data[:2] != _DM_MAGIC:
            raise ValueError("not a density-matrix record")
        (n,) = struct.unpack("<B", data[2:3])
        N = 1 << n
        ent = np.frombuffer(data[3:], dtype="<c16")
        if ent.size != N * N:
            raise ValueError("density-matrix record has wrong length")
        ent = ent.reshape(N, N)
        if not np.any(ent.imag):
            ent = ent.real
        return cls(n, ent.copy())


def _same_n(a, b):
    if a.n != b.n:
        raise ValueError(f"mismatched n: {a.n} vs {b.n}")


def plus_state(n: int) -> StateVector:
    n = check_n(n, MAX_N)
    return StateVector(n, np.full(1 << n, 2.0 ** (-n / 2)))


def basis_state(n: int, index: int) -> StateVector:
    amp = np.zeros(1 << check_n(n, MAX_N))
    amp[index] = 1.0
    return StateVector(n, amp)


def apply_phase(state: StateVector, f: TruthTable) -> StateVector:
    """U_f |x> = f(x) |x>."""
    _same_n(state, f)
    return StateVector(state.n, state.amplitudes * f.values)


def apply_hadamard(state: StateVector) -> StateVector:
    return StateVector(state.n, hadamard_apply(state.amplitudes))


def phase_state(f: TruthTable) -> StateVector:
    return apply_phase(plus_state(f.n), f)


def t_forrelation_state(funcs) -> StateVector:
    """U_{f^t} H U_{f^{t-1}} H ... H U_{f^1} |+^n>."""
    funcs = list(funcs)
    if not funcs:
        raise ValueError("need at least one function")
    n = funcs[0].n
    for f in funcs:
        if f.n != n:
            raise ValueError("all functions must share n")
    amp = funcs[0].values * 2.0 ** (-n / 2)
    for f in funcs[1:]:
        amp = hadamard_apply(amp) * f.values
    return StateVector(n, amp)


def sample_haar(n: int, rng) -> StateVector:
    """Normalized i.i.d. standard complex Gaussians."""
    N = 1 << check_n(n, MAX_N)
    z = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    return StateVector(n, z / np.linalg.norm(z))


def sample_haar_batch(n: int, count: int, rng) -> np.ndarray:
    N = 1 << check_n(n, MAX_N)
    z = rng.standard_normal((count, N)) + 1j * rng.standard_normal((count, N))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>."""
    _same_n(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def density_from_ensemble(states, weights=None) -> DensityMatrix:
    """sum_i w_i |psi_i><psi_i| for StateVectors or a (count, 2^n) amplitude array."""
    if isinstance(states, np.ndarray):
        amps = states
    else:
        states = list(states)
        if not states:
            raise ValueError("empty ensemble")
        amps = np.stack([s.amplitudes for s in states])
    count, N = amps.shape
    n = N.bit_length() - 1
    if n > DENSE_MAX_N:
        raise CapError(f"dense density matrices are capped at n={DENSE_MAX_N}")
    if weights is None:
        w = np.full(count, 1.0 / count)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (count,) or np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
            raise ValueError("weights must be nonnegative, one per state, summing to 1")
    rho = (amps.T * w) @ amps.conj()
    return DensityMatrix(n, rho)


def tvd(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same support size")
    for v in (p, q):
        if np.any(v < -NORM_TOL) or abs(v.sum() - 1.0) > NORM_TOL:
            raise ValueError("not a probability vector")
    return 0.5 * float(np.abs(p - q).sum())


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) sum |eigenvalues of rho - sigma|."""
    _same_n(rho, sigma)
    diff = rho.entries - sigma.entries
    if np.max(np.abs(diff - diff.conj().T)) > NORM_TOL:
        raise ValueError("difference is not Hermitian")
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def fidelity_overlap_sq(a: StateVector, b: StateVector) -> float:
    return abs(overlap(a, b)) ** 2


def enumerate_phase_states(n: int) -> np.ndarray:
    """Amplitudes of |Phi_h> for all 2^(2^n) functions h (n <= 4)."""
    if n > 4:
        raise CapError("phase-state enumeration is limited to n <= 4")
    N = 1 << n
    idx = np.arange(1 << N, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(N - 1, -1, -1)) & 1
    return (1 - 2 * bits) / math.sqrt(N)
