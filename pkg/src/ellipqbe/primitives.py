"""Reusable circuit building blocks.

Gate-list builders (``*_gates``) take explicit qubit indices so encodings can
place them on any register; the ``Circuit``-returning wrappers lay out their
own registers with the data qubits first.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import atan2, ceil, log2, sqrt

import numpy as np

from .circuit import Circuit, CircuitError, Gate, call, inverse


def nbits(k: int) -> int:
    """Qubits needed to index k items."""
    return 0 if k <= 1 else ceil(log2(k))


def work_size(n: int) -> int:
    """Clean workspace used by the ladder incrementer on n qubits."""
    return max(0, n - 2)


@dataclass(frozen=True)
class MarkedSet:
    indices: tuple[int, ...]
    N: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise CircuitError("marked set has duplicates")
        if any(i < 0 or i >= self.N for i in idx):
            raise CircuitError("marked index out of range")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def shifted(self, c: int) -> "MarkedSet":
        return MarkedSet(tuple((i + c) % self.N for i in self.indices), self.N)


@dataclass(frozen=True)
class CoefficientVector:
    values: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        if not v or all(x == 0 for x in v):
            raise CircuitError("coefficient vector must have a nonzero entry")
        object.__setattr__(self, "values", v)

    @property
    def lam(self) -> float:
        return float(sum(abs(x) for x in self.values))

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(np.array(self.values))

    @property
    def signs(self) -> np.ndarray:
        return np.sign(np.array(self.values))

    def __len__(self):
        return len(self.values)


# ----------------------------------------------------------------------------
# Shifts


def increment_gates(x, work=(), controls=(), method: str = "ladder") -> list[Gate]:
    """|l> -> |l+1 mod 2^n> on qubits ``x`` (LSB first).

    ``ladder`` computes the carry ANDs into ``work`` (n-2 clean qubits) and
    uses 2n-4 Toffolis; ``cascade`` is the multi-controlled X cascade with
    widths n-1, ..., 1 and needs no workspace.
    """
    x = list(x)
    n = len(x)
    ctl = tuple(controls)
    if n == 0:
        return []
    if method == "cascade" or n <= 2:
        gates = [Gate("X", (x[t],), ctl + tuple((x[i], 1) for i in range(t))) for t in range(n - 1, 0, -1)]
        return gates + [Gate("X", (x[0],), ctl)]
    if method != "ladder":
        raise CircuitError(f"unknown incrementer method {method!r}")
    w = list(work)
    if len(w) < n - 2:
        raise CircuitError(f"ladder incrementer on {n} qubits needs {n - 2} work qubits")

    def carry(i):
        # w[i] = x0 & x1 & ... & x_{i+1}
        src = (x[0], x[1]) if i == 0 else (w[i - 1], x[i + 1])
        return Gate("X", (w[i],), ((src[0], 1), (src[1], 1)))

    gates = [carry(i) for i in range(n - 2)]
    for t in range(n - 1, 1, -1):
        gates.append(Gate("X", (x[t],), ctl + ((w[t - 2], 1),)))
        gates.append(carry(t - 2))
    gates.append(Gate("X", (x[1],), ctl + ((x[0], 1),)))
    gates.append(Gate("X", (x[0],), ctl))
    return gates


def shift_gates(x, j: int, work=(), controls=(), method: str = "ladder") -> list[Gate]:
    """|l> -> |l+j mod 2^n> as a signed sum of power-of-two increments."""
    x = list(x)
    n = len(x)
    N = 2**n
    if abs(j) >= N and j % N != 0:
        raise CircuitError("|j| must be < 2^n")
    j = int(j)
    if j % N == 0:
        return []
    # Shortest signed form: choose the direction with fewer set bits.
    up, down = j % N, (-j) % N
    sign = 1 if bin(up).count("1") <= bin(down).count("1") else -1
    m = up if sign == 1 else down
    gates: list[Gate] = []
    for k in range(n):
        if (m >> k) & 1:
            g = increment_gates(x[k:], work, controls, method)
            if sign == -1:
                g = list(inverse(Circuit(_width(g), tuple(g))).gates)
            gates += g
    return gates


def _width(gates) -> int:
    qs = set()
    for g in gates:
        qs |= g.qubits()
    return max(qs) + 1 if qs else 0


def incrementer(n: int, method: str = "ladder") -> Circuit:
    w = work_size(n) if method == "ladder" else 0
    regs = {"x": (0, n)} | ({"work": (n, w)} if w else {})
    return Circuit(n + w, tuple(increment_gates(range(n), range(n, n + w), (), method)), regs)


def decrementer(n: int, method: str = "ladder") -> Circuit:
    return inverse(incrementer(n, method))


def shift_by(n: int, j: int, method: str = "ladder") -> Circuit:
    if abs(j) >= 2**n:
        raise CircuitError("|j| must be < 2^n")
    w = work_size(n) if method == "ladder" else 0
    regs = {"x": (0, n)} | ({"work": (n, w)} if w else {})
    return Circuit(n + w, tuple(shift_gates(range(n), j, range(n, n + w), (), method)), regs)


# ----------------------------------------------------------------------------
# Reflections and phase oracles


def reflection_gates(x, A, controls=()) -> list[Gate]:
    """diag(+-1) with -1 exactly on the basis states in A, one MCZ per element."""
    x = list(x)
    n = len(x)
    ctl = tuple(controls)
    gates: list[Gate] = []
    for a in A:
        flips = [Gate("X", (x[q],)) for q in range(n) if not (a >> q) & 1]
        gates += flips
        gates.append(Gate("Z", (x[n - 1],), ctl + tuple((x[q], 1) for q in range(n - 1))))
        gates += flips
    return gates


def reflection(n: int, A) -> Circuit:
    A = A.indices if isinstance(A, MarkedSet) else MarkedSet(tuple(A), 2**n).indices
    if not A:
        raise CircuitError("reflection requires a nonempty marked set")
    return Circuit(n, tuple(reflection_gates(range(n), A)))


def parity_kickback(variant: str = "f") -> Circuit:
    """f: phase -1 on |01>,|10>; f': phase -1 on |00>,|11>."""
    zz = [Gate("Z", (0,)), Gate("Z", (1,))]
    if variant == "f":
        return Circuit(2, tuple(zz))
    if variant in ("f'", "fprime"):
        return Circuit(2, (Gate("X", (0,)), *zz, Gate("X", (0,))))
    raise CircuitError(f"unknown parity variant {variant!r}")


# ----------------------------------------------------------------------------
# Arithmetic


def _maj(c, b, a):
    return [Gate("X", (b,), ((a, 1),)), Gate("X", (c,), ((a, 1),)), Gate("X", (a,), ((c, 1), (b, 1)))]


def _uma(c, b, a):
    return [Gate("X", (a,), ((c, 1), (b, 1))), Gate("X", (c,), ((a, 1),)), Gate("X", (b,), ((c, 1),))]


def add_gates(a, b, carry: int, carry_in: int = 0) -> list[Gate]:
    """Ripple-carry b <- a + b + carry_in (mod 2^n); a and the clean carry qubit restored."""
    a, b = list(a), list(b)
    n = len(a)
    pre = [Gate("X", (carry,))] if carry_in else []
    cs = [carry] + a[:-1]
    g = list(pre)
    for k in range(n):
        g += _maj(cs[k], b[k], a[k])
    for k in range(n - 1, -1, -1):
        g += _uma(cs[k], b[k], a[k])
    return g + pre


def compare_gates(i, j, flag: int, carry: int) -> list[Gate]:
    """flag ^= [i >= j] via the carry out of i + j' + 1; inputs restored."""
    i, j = list(i), list(j)
    n = len(i)
    comp = [Gate("X", (q,)) for q in j]
    fwd = [Gate("X", (carry,))]
    cs = [carry] + i[:-1]
    for k in range(n):
        fwd += _maj(cs[k], j[k], i[k])
    copy = [Gate("X", (flag,), ((i[n - 1], 1),))]
    back = list(inverse(Circuit(_width(fwd + [copy[0]]) , tuple(fwd))).gates)
    return comp + fwd + copy + back + comp


def diff_gates(i, j, carry: int) -> list[Gate]:
    """|i>|j> -> |i>|i - j mod 2^n> (complement j, then add i with carry-in 1)."""
    comp = [Gate("X", (q,)) for q in j]
    return comp + add_gates(i, j, carry, carry_in=1)


def comparator(n: int) -> Circuit:
    regs = {"i": (0, n), "j": (n, n), "flag": (2 * n, 1), "carry": (2 * n + 1, 1)}
    g = compare_gates(range(n), range(n, 2 * n), 2 * n, 2 * n + 1)
    return Circuit(2 * n + 2, tuple(g), regs)


def diff(n: int) -> Circuit:
    regs = {"i": (0, n), "j": (n, n), "carry": (2 * n, 1)}
    return Circuit(2 * n + 1, tuple(diff_gates(range(n), range(n, 2 * n), 2 * n)), regs)


# ----------------------------------------------------------------------------
# State preparation


def prep_gates(qubits, weights) -> list[Gate]:
    """|0> -> sum_i sqrt(w_i / sum w)|i> by a tree of multiplexed RY rotations."""
    q = list(qubits)
    m = len(q)
    w = np.zeros(2**m)
    w[: len(weights)] = np.abs(np.asarray(weights, dtype=float))
    if w.sum() <= 0:
        raise CircuitError("state preparation needs a nonzero weight")
    gates: list[Gate] = []

    def rec(lo, size, level, ctl):
        if level < 0:
            return
        half = size // 2
        left, right = w[lo : lo + half].sum(), w[lo + half : lo + size].sum()
        if left + right <= 0:
            return
        theta = 2 * atan2(sqrt(right), sqrt(left))
        if theta != 0:
            gates.append(Gate("RY", (q[level],), tuple(ctl), (theta,)))
        rec(lo, half, level - 1, ctl + [(q[level], 0)])
        rec(lo + half, half, level - 1, ctl + [(q[level], 1)])

    rec(0, 2**m, m - 1, [])
    return gates


def uniform_gates(qubits, k: int) -> list[Gate]:
    q = list(qubits)
    if k == 2 ** len(q):
        return [Gate("H", (x,)) for x in q]
    return prep_gates(q, [1.0] * k)


def uniform_prep(k: int) -> Circuit:
    if k < 1:
        raise CircuitError("k must be >= 1")
    m = nbits(k)
    return Circuit(m, tuple(uniform_gates(range(m), k)))


def prep_state(c: CoefficientVector | list) -> Circuit:
    c = c if isinstance(c, CoefficientVector) else CoefficientVector(tuple(c))
    m = nbits(len(c))
    return Circuit(m, tuple(prep_gates(range(m), c.magnitudes)))


__all__ = [
    "CoefficientVector",
    "MarkedSet",
    "add_gates",
    "call",
    "comparator",
    "compare_gates",
    "decrementer",
    "diff",
    "diff_gates",
    "increment_gates",
    "incrementer",
    "nbits",
    "parity_kickback",
    "prep_gates",
    "prep_state",
    "reflection",
    "reflection_gates",
    "shift_by",
    "shift_gates",
    "uniform_gates",
    "uniform_prep",
    "work_size",
]
