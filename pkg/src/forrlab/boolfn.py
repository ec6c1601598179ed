"""Boolean functions on {+1,-1}^n: truth tables and Walsh-Hadamard analysis.

Index convention used everywhere in the package: a point x in {+1,-1}^n maps
to the n-bit integer whose i-th most significant bit is 1 iff x_i = -1.  The
same integer indexes Fourier coefficients, so ``coeffs[i]`` is f^(S) with
S = {j : bit j of i is set}.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAX_N = 24

_TT_MAGIC = b"TT"
_TT_VERSION = 1


class CapError(ValueError):
    """Raised when a size parameter exceeds an in-memory cap."""


def check_n(n: int, cap: int = MAX_N) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"n must be an integer, got {type(n).__name__}")
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > cap:
        raise CapError(f"n={n} exceeds cap {cap}")
    return n


def index_of(x) -> int:
    """Array offset of a point x in {+1,-1}^n (MSB first, -1 -> bit 1)."""
    idx = 0
    for xi in x:
        if xi not in (1, -1):
            raise ValueError(f"coordinates must be +1/-1, got {xi}")
        idx = (idx << 1) | (xi == -1)
    return idx


def point_of(index: int, n: int) -> tuple[int, ...]:
    """Inverse of :func:`index_of`."""
    if not 0 <= index < (1 << n):
        raise ValueError(f"index {index} out of range for n={n}")
    return tuple(-1 if (index >> (n - 1 - i)) & 1 else 1 for i in range(n))


def popcounts(n: int) -> np.ndarray:
    """Hamming weight |S| of every index 0..2^n-1."""
    idx = np.arange(1 << n, dtype=np.int64)
    w = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        w += (idx >> b) & 1
    return w


def wht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Integer inputs stay integer (exact); the result of applying it twice is
    2^n times the input.
    """
    a = np.array(a, copy=True)
    if a.dtype == np.int8 or a.dtype == np.int16:
        a = a.astype(np.int32)
    shape = a.shape
    N = shape[-1]
    if N & (N - 1):
        raise ValueError(f"last axis length {N} is not a power of two")
    flat = a.reshape(-1, N)
    h = 1
    while h < N:
        v = flat.reshape(flat.shape[0], N // (2 * h), 2, h)
        lo = v[:, :, 0, :].copy()
        v[:, :, 0, :] += v[:, :, 1, :]
        np.subtract(lo, v[:, :, 1, :], out=v[:, :, 1, :])
        h *= 2
    return flat.reshape(shape)


def hadamard_apply(a: np.ndarray) -> np.ndarray:
    """Normalized Hadamard H = [[1,1],[1,-1]]^{(x)n}/sqrt(2^n) along the last axis."""
    a = np.asarray(a)
    N = a.shape[-1]
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    return wht(a.astype(dtype)) / np.sqrt(N)


def trnc(z, a: float = 1.0):
    """Clamp to [-a, a]; works on scalars and arrays."""
    if not a > 0:
        raise ValueError(f"truncation radius must be positive, got {a}")
    out = np.clip(z, -a, a)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class TruthTable:
    """A Boolean function {+1,-1}^n -> {+1,-1} stored as its 2^n values."""

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = check_n(self.n)
        v = np.asarray(self.values)
        if v.shape != (1 << n,):
            raise ValueError(f"truth table for n={n} needs length {1 << n}, got shape {v.shape}")
        if not np.all((v == 1) | (v == -1)):
            raise ValueError("truth table entries must be +1 or -1")
        v = v.astype(np.int8)
        v.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, n: int, fn) -> "TruthTable":
        return cls(n, np.array([fn(point_of(i, n)) for i in range(1 << n)]))

    @classmethod
    def constant(cls, n: int, value: int = 1) -> "TruthTable":
        return cls(n, np.full(1 << n, value, dtype=np.int8))

    @property
    def size(self) -> int:
        return 1 << self.n

    def __call__(self, x) -> int:
        return int(self.values[index_of(x)])

    def __mul__(self, other: "TruthTable") -> "TruthTable":
        if not isinstance(other, TruthTable):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("pointwise product needs matching n")
        return TruthTable(self.n, self.values * other.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruthTable):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.n, self.values.tobytes()))

    def to_bytes(self) -> bytes:
        bits = np.packbits(self.values == -1, bitorder="big")
        return _TT_MAGIC + struct.pack("<BB", _TT_VERSION, self.n) + bits.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TruthTable":
        tt, rest = cls.read_record(data)
        if rest:
            raise ValueError(f"{len(rest)} trailing bytes after truth-table record")
        return tt

    @classmethod
    def read_record(cls, data: bytes) -> tuple["TruthTable", bytes]:
        """Parse one record from the front of ``data``; return it and the remainder."""
        if len(data) < 4 or data[:2] != _TT_MAGIC:
            raise ValueError("not a truth-table record (bad magic)")
        version, n = struct.unpack("<BB", data[2:4])
        if version != _TT_VERSION:
            raise ValueError(f"unsupported truth-table version {version}")
        check_n(n)
        nbytes = max(1, (1 << n) // 8)
        body = data[4 : 4 + nbytes]
        if len(body) != nbytes:
            raise ValueError("truncated truth-table record")
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="big")[: 1 << n]
        return cls(n, 1 - 2 * bits.astype(np.int8)), data[4 + nbytes :]

    def to_text(self) -> str:
        return "".join("+" if v == 1 else "-" for v in self.values)

    @classmethod
    def from_text(cls, text: str) -> "TruthTable":
        text = text.strip()
        N = len(text)
        if N == 0 or N & (N - 1) or N == 1:
            raise ValueError(f"text length {N} is not 2^n for n >= 1")
        if set(text) - {"+", "-"}:
            raise ValueError("text truth tables use only '+' and '-'")
        return cls(N.bit_length() - 1, np.array([1 if c == "+" else -1 for c in text]))


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    """The 2^n Fourier coefficients of a real function on {+1,-1}^n."""

    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = check_n(self.n)
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (1 << n,):
            raise ValueError(f"spectrum for n={n} needs length {1 << n}, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, x) -> float:
        if isinstance(x, (int, np.integer)):
            return float(self.coeffs[x])
        return float(self.coeffs[index_of(x)])

    def level_weights(self) -> np.ndarray:
        """Sum of squared coefficients at each level 0..n."""
        return np.bincount(popcounts(self.n), weights=self.coeffs**2, minlength=self.n + 1)


def fwht(f: TruthTable) -> FourierSpectrum:
    """Fourier coefficients f^(x) = 2^-n sum_y f(y) prod_{i in S(x)} y_i."""
    return FourierSpectrum(f.n, wht(f.values) / float(f.size))


def fwht_batch(tables: np.ndarray) -> np.ndarray:
    """Fourier coefficients of many truth tables stacked along axis 0."""
    tables = np.asarray(tables)
    return wht(tables) / float(tables.shape[-1])


def inverse_fwht(s: FourierSpectrum) -> np.ndarray:
    """Evaluate the multilinear polynomial sum_S s(S) chi_S at every point."""
    return wht(s.coeffs)


def l1_level(s: FourierSpectrum, level: int) -> float:
    """L_{1,level}: total absolute Fourier mass on sets of the given size."""
    if not 0 <= level <= s.n:
        raise ValueError(f"level must lie in 0..{s.n}, got {level}")
    mask = popcounts(s.n) == level
    return float(np.abs(s.coeffs[mask]).sum())


def random_signs(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform +1/-1 int8 array; one random bit per entry, drawn from packed bytes."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    size = int(np.prod(shape, dtype=np.int64))
    nbytes = (size + 7) // 8
    bits = np.unpackbits(rng.integers(0, 256, size=nbytes, dtype=np.uint8))[:size]
    return (1 - 2 * bits.astype(np.int8)).reshape(shape)


def sample_uniform_fn(n: int, rng: np.random.Generator) -> TruthTable:
    n = check_n(n)
    return TruthTable(n, random_signs(1 << n, rng))


def biased_signs(bias: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent +1/-1 entries with E[entry] = bias, elementwise (any shape)."""
    bias = np.asarray(bias, dtype=np.float64)
    if np.any(np.abs(bias) > 1):
        raise ValueError("bias entries must lie in [-1, 1]")
    u = rng.random(bias.shape)
    return np.where(u < (1.0 + bias) / 2.0, 1, -1).astype(np.int8)


def sample_biased_fn(bias, rng: np.random.Generator) -> TruthTable:
    """Entry x is +1 with probability (1 + bias[x])/2, independently."""
    bias = np.asarray(bias, dtype=np.float64)
    N = bias.shape[0] if bias.ndim == 1 else 0
    if bias.ndim != 1 or N < 2 or N & (N - 1):
        raise ValueError("bias must be a vector of length 2^n, n >= 1")
    return TruthTable(N.bit_length() - 1, biased_signs(bias, rng))
