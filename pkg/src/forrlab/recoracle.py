"""A bounded toy of the recursive oracle O[A] = (A, B).

A is a keyed hash returning +-1 on bit strings.  B(x) decodes x as a pair
<M, y> of a straight-line circuit M and an input y, and answers +1 iff some
witness assignment makes M(y) output 1.  M may query A and B on strings of
length at most floor(sqrt(len(x))), so the recursion bottoms out.

Bit layout of x (all integers use Elias-gamma, written ``g(v)``, for v >= 1):

    g(w + 1)          witness count w, 0 <= w <= 8
    g(|y| + 1)        input length
    y                 |y| raw bits
    gates...          each gate = 3-bit opcode + operands
    000               END
    0...0             zero padding up to len(x)

Wires 0..w-1 carry the witness, w..w+|y|-1 carry y, and every gate appends
one wire.  Wire operands are written in r = max(1, bitlen(wires - 1)) bits,
where ``wires`` is the count before the gate.  Opcodes:

    001 NOT a      010 AND a b     011 OR a b      100 XOR a b
    101 QA s g(L+1)   query A on wires s..s+L-1 (bit 1 iff A = +1)
    110 QB s g(L+1)   the same for B
    111 CONST c       one literal bit

The output is the last wire.  Anything that fails to parse (bad gamma code,
w > 8, wire out of range, query longer than floor(sqrt(len(x))), nonzero
padding, no wires) is malformed and B = -1 on it.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import struct
import threading
from dataclasses import dataclass, field

from .boolfn import CapError

MAX_WITNESS = 8
DEFAULT_MAX_LENGTH = 8192
NESTED_TOP_LENGTH = 6400

END, NOT, AND, OR, XOR, QA, QB, CONST = range(8)
OP_NAMES = ("END", "NOT", "AND", "OR", "XOR", "QA", "QB", "CONST")


def _bits(x) -> str:
    if isinstance(x, str):
        if x.strip("01"):
            raise ValueError("bit strings use only '0' and '1'")
        return x
    return "".join("1" if int(b) else "0" for b in x)


def gamma(v: int) -> str:
    if v < 1:
        raise ValueError("gamma codes need v >= 1")
    b = bin(v)[2:]
    return "0" * (len(b) - 1) + b


def _ref_width(wires: int) -> int:
    return max(1, (wires - 1).bit_length())


@dataclass(frozen=True)
class Gate:
    op: int
    a: int = 0
    b: int = 0

    def __repr__(self):
        return f"{OP_NAMES[self.op]}({self.a}, {self.b})"


class _Reader:
    def __init__(self, s: str):
        self.s, self.i = s, 0

    def take(self, k: int) -> str:
        if self.i + k > len(self.s):
            raise ValueError("ran out of bits")
        out = self.s[self.i : self.i + k]
        self.i += k
        return out

    def int_(self, k: int) -> int:
        return int(self.take(k), 2)

    def gamma(self) -> int:
        z = 0
        while self.take(1) == "0":
            z += 1
        return (1 << z) | (self.int_(z) if z else 0)


@dataclass(frozen=True)
class MachineDesc:
    witnesses: int
    y: str
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "y", _bits(self.y))
        object.__setattr__(self, "gates", tuple(self.gates))

    @property
    def input_wires(self) -> int:
        return self.witnesses + len(self.y)

    def body(self) -> str:
        out = [gamma(self.witnesses + 1), gamma(len(self.y) + 1), self.y]
        wires = self.input_wires
        for g in self.gates:
            r = _ref_width(wires)
            refs = () if g.op == CONST else (g.a,) if g.op in (NOT, QA, QB) else (g.a, g.b)
            if any(not 0 <= v < wires for v in refs):
                raise ValueError(f"gate {g!r} refers past wire {wires - 1}")
            out.append(format(g.op, "03b"))
            if g.op == NOT:
                out.append(format(g.a, f"0{r}b"))
            elif g.op in (AND, OR, XOR):
                out.append(format(g.a, f"0{r}b") + format(g.b, f"0{r}b"))
            elif g.op in (QA, QB):
                out.append(format(g.a, f"0{r}b") + gamma(g.b + 1))
            elif g.op == CONST:
                out.append(str(g.a & 1))
            else:
                raise ValueError(f"bad opcode {g.op}")
            wires += 1
        out.append("000")
        return "".join(out)

    def encode(self, length: int | None = None) -> str:
        """Bit string of exactly ``length`` bits (the shortest encoding if None)."""
        s = self.body()
        if length is None:
            return s
        if len(s) > length:
            raise ValueError(f"machine needs {len(s)} bits, more than {length}")
        return s + "0" * (length - len(s))

    def to_bytes(self, length: int | None = None) -> bytes:
        s = self.encode(length)
        pad = s + "0" * (-len(s) % 8)
        return b"MD" + struct.pack("<H", len(s)) + int(pad or "0", 2).to_bytes(len(pad) // 8, "big")

    @staticmethod
    def bits_from_bytes(data: bytes) -> str:
        if data[:2] != b"MD":
            raise ValueError("not a machine record")
        (length,) = struct.unpack("<H", data[2:4])
        raw = "".join(format(b, "08b") for b in data[4:])
        if len(raw) < length:
            raise ValueError("machine record truncated")
        return raw[:length]


def decode(x) -> MachineDesc | None:
    """Parse x as <M, y>; None if malformed."""
    s = _bits(x)
    cap = math.isqrt(len(s))
    rd = _Reader(s)
    try:
        w = rd.gamma() - 1
        if w > MAX_WITNESS:
            return None
        y = rd.take(rd.gamma() - 1)
        wires = w + len(y)
        gates = []
        while True:
            op = rd.int_(3)
            if op == END:
                break
            r = _ref_width(wires)
            if op == NOT:
                g = Gate(op, rd.int_(r))
                ok = g.a < wires
            elif op in (AND, OR, XOR):
                g = Gate(op, rd.int_(r), rd.int_(r))
                ok = g.a < wires and g.b < wires
            elif op in (QA, QB):
                g = Gate(op, rd.int_(r), rd.gamma() - 1)
                ok = g.b <= cap and g.a < wires and g.a + g.b <= wires
            else:
                g = Gate(op, rd.int_(1))
                ok = True
            if not ok:
                return None
            gates.append(g)
            wires += 1
    except ValueError:
        return None
    if wires == 0 or "1" in s[rd.i :]:
        return None
    return MachineDesc(w, y, tuple(gates))


def run_machine(m: MachineDesc, witness: str, query_a, query_b) -> int:
    """Evaluate M on (witness, y); query callbacks take a bit string and return +-1."""
    wires = [int(c) for c in witness] + [int(c) for c in m.y]
    for g in m.gates:
        if g.op == NOT:
            v = 1 - wires[g.a]
        elif g.op == AND:
            v = wires[g.a] & wires[g.b]
        elif g.op == OR:
            v = wires[g.a] | wires[g.b]
        elif g.op == XOR:
            v = wires[g.a] ^ wires[g.b]
        elif g.op in (QA, QB):
            q = "".join(str(b) for b in wires[g.a : g.a + g.b])
            v = int((query_a if g.op == QA else query_b)(q) == 1)
        else:
            v = g.a
        wires.append(v)
    return wires[-1]


def _witnesses(w: int):
    return ("".join(t) for t in itertools.product("01", repeat=w))


class RecursiveOracle:
    """O[A] = (A, B) with a seeded A and memoized B."""

    def __init__(self, seed: int, max_length: int = DEFAULT_MAX_LENGTH, memo: bool = True):
        self.seed = int(seed)
        self.max_length = max_length
        self.use_memo = memo
        self._key = hashlib.blake2b(str(self.seed).encode(), digest_size=32).digest()
        self._memo: dict[str, int] = {}
        self._lock = threading.Lock()
        self._local = threading.local()
        self.max_depth_seen = 0

    def _check(self, s: str):
        if len(s) > self.max_length:
            raise CapError(f"string of length {len(s)} exceeds the cap {self.max_length}")

    def eval_A(self, x) -> int:
        s = _bits(x)
        self._check(s)
        h = hashlib.blake2b(struct.pack("<I", len(s)) + s.encode(), key=self._key, digest_size=8).digest()
        return 1 if h[0] & 1 else -1

    def eval_B(self, x) -> int:
        s = _bits(x)
        self._check(s)
        if self.use_memo:
            hit = self._memo.get(s)
            if hit is not None:
                return hit
        m = decode(s)
        if m is None:
            val = -1
        else:
            depth = getattr(self._local, "depth", 0)
            self._local.depth = depth + 1
            try:
                if depth > self.depth_bound(self.max_length):
                    raise AssertionError(f"recursion depth {depth} exceeds the log log bound")
                with self._lock:
                    self.max_depth_seen = max(self.max_depth_seen, depth)
                acc = any(run_machine(m, wt, self.eval_A, self.eval_B) for wt in _witnesses(m.witnesses))
                val = 1 if acc else -1
            finally:
                self._local.depth = depth
        if self.use_memo:
            with self._lock:
                val = self._memo.setdefault(s, val)
        return val

    @staticmethod
    def depth_bound(length: int) -> int:
        """ceil(log2 log2 length): lengths shrink as l -> floor(sqrt(l))."""
        if length < 4:
            return 0
        return math.ceil(math.log2(math.log2(length)))

    @property
    def memo_size(self) -> int:
        return len(self._memo)


def brute_force_B(x, query_a) -> int:
    """Existential evaluation by exhaustive witness search, recursing without any cache."""
    m = decode(x)
    if m is None:
        return -1
    qb = lambda q: brute_force_B(q, query_a)  # noqa: E731
    for wt in _witnesses(m.witnesses):
        if run_machine(m, wt, query_a, qb):
            return 1
    return -1


# Demo machines


def random_machine(rng, length: int, max_witnesses: int = 3, max_gates: int = 6, tries: int = 1000) -> MachineDesc:
    """A random well-formed machine whose encoding fits in ``length`` bits."""
    cap = math.isqrt(length)
    for _ in range(tries):
        w = int(rng.integers(0, max_witnesses + 1))
        y = "".join(rng.choice(["0", "1"], size=int(rng.integers(0, 4))))
        wires = w + len(y)
        gates = []
        for _ in range(int(rng.integers(0 if wires else 1, max_gates + 1))):
            op = int(rng.integers(1, 8))
            if wires == 0 and op != CONST:
                op = CONST
            if op == NOT:
                g = Gate(op, int(rng.integers(wires)))
            elif op in (AND, OR, XOR):
                g = Gate(op, int(rng.integers(wires)), int(rng.integers(wires)))
            elif op in (QA, QB):
                L = int(rng.integers(0, min(cap, wires) + 1))
                g = Gate(op, int(rng.integers(0, min(wires - L, wires - 1) + 1)), L)
            else:
                g = Gate(op, int(rng.integers(2)))
            gates.append(g)
            wires += 1
        m = MachineDesc(w, y, gates)
        if len(m.body()) <= length:
            return m
    raise ValueError(f"could not fit a random machine in {length} bits")


def const_string_gates(bits: str) -> list[Gate]:
    return [Gate(CONST, int(c)) for c in bits]


def nested_machine(top_length: int = NESTED_TOP_LENGTH) -> tuple[MachineDesc, dict]:
    """A machine that queries B on a machine that itself queries B (two nested levels).

    inner (8 bits):   w=0, y=b, output y                    -> B = +1 iff b = 1
    middle (80 bits): one witness u; builds inner(b = u), asks B on it, asks A on (u, u)
                      and outputs B-answer AND A-answer
    top:              two witnesses ignored except as a cover, builds middle, asks B on it,
                      and ORs the result with NOT of an A-query on a constant pair
    Returns the top machine and the component encodings.
    """
    inner_len, mid_len = 8, math.isqrt(top_length)
    # middle: wire 0 = u
    inner_prefix = gamma(1) + gamma(2)  # w=0, |y|=1
    gates = const_string_gates(inner_prefix)  # wires 1..4
    gates.append(Gate(OR, 0, 0))  # wire 5 = u, the inner y bit
    gates += const_string_gates("000")  # wires 6..8: END
    gates.append(Gate(QB, 1, inner_len))  # wire 9
    gates.append(Gate(QA, 0, 1))  # wire 10 = A(u)
    gates.append(Gate(AND, 9, 10))  # wire 11
    middle = MachineDesc(1, "", gates)
    mid_bits = middle.encode(mid_len)

    top_gates = const_string_gates(mid_bits)  # wires 2..mid_len+1
    q = 2 + mid_len
    top_gates.append(Gate(QB, 2, mid_len))  # q
    top_gates += const_string_gates("01")  # q+1, q+2
    top_gates.append(Gate(QA, q + 1, 2))  # q+3 = A("01")
    top_gates.append(Gate(NOT, q + 3))
    top_gates.append(Gate(AND, q + 4, 0))  # not A("01") and witness bit 0
    top_gates.append(Gate(OR, q, q + 5))
    top = MachineDesc(2, "", top_gates)
    top.encode(top_length)
    return top, {"middle": mid_bits, "inner_true": (inner_prefix + "1000"), "inner_false": (inner_prefix + "0000")}


def unrolled_nested_value(query_a) -> int:
    """Hand-unrolled B on the nested machine: B(top) = B(middle) or not A("01")."""
    # inner(b) accepts iff b = 1, so the middle accepts iff A("1") = +1 (u = 1)
    middle = query_a("1") == 1
    escape = query_a("01") != 1
    return 1 if (middle or escape) else -1


@dataclass
class DemoReport:
    seed: int
    machines: int
    agreements: int
    exhaustive_length: int
    exhaustive_wellformed: int
    random_machines: int
    nested_cases: int
    max_depth_seen: int
    failures: list = field(default_factory=list)

    @property
    def agreement(self) -> float:
        return 1.0 if self.machines == 0 else self.agreements / self.machines

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["agreement"] = self.agreement
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def demo_p_equals_np(oracle: RecursiveOracle, machines) -> DemoReport:
    """Compare the one-query decision B(<M, y>) with brute-force witness search for each (M, length)."""
    agree, total, fails = 0, 0, []
    for m, length in machines:
        x = m.encode(length) if isinstance(m, MachineDesc) else _bits(m)
        single = oracle.eval_B(x)
        brute = brute_force_B(x, oracle.eval_A)
        total += 1
        if single == brute:
            agree += 1
        else:
            fails.append(x)
    return DemoReport(oracle.seed, total, agree, 0, 0, 0, 0, oracle.max_depth_seen, fails)


def standard_demo(seed: int, random_count: int = 50, random_length: int = 12, exhaustive_length: int = 12):
    """Exhaustive enumeration at one length, random machines, and the nested case."""
    import numpy as np

    oracle = RecursiveOracle(seed)
    rng = np.random.default_rng(seed)
    items = []
    wellformed = 0
    for v in range(1 << exhaustive_length):
        x = format(v, f"0{exhaustive_length}b")
        if decode(x) is not None:
            wellformed += 1
            items.append((x, exhaustive_length))
    for _ in range(random_count):
        items.append((random_machine(rng, random_length), random_length))
    top, _ = nested_machine()
    items.append((top, NESTED_TOP_LENGTH))
    rep = demo_p_equals_np(oracle, items)
    nested_ok = oracle.eval_B(top.encode(NESTED_TOP_LENGTH)) == unrolled_nested_value(oracle.eval_A)
    rep.machines += 1
    rep.agreements += int(nested_ok)
    if not nested_ok:
        rep.failures.append("nested-unrolled")
    rep.exhaustive_length = exhaustive_length
    rep.exhaustive_wellformed = wellformed
    rep.random_machines = random_count
    rep.nested_cases = 1
    rep.max_depth_seen = oracle.max_depth_seen
    return rep
