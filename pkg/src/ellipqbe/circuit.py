"""Gate-level circuit IR, dense statevector simulation and Toffoli accounting.

Qubit 0 is the least-significant bit of a basis index. A gate's controls are
``(qubit, polarity)`` pairs, so control-on-0 is expressed directly. The
``MCU`` kind wraps a tuple of sub-gates that are applied only when its controls
are satisfied; an ``MCU`` with no controls is a plain sub-circuit call and lets
deep circuits (for example QSP sequences) share one gate list.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import cos, sin

import numpy as np

DENSE_QUBIT_CEILING = 12

KINDS = ("X", "Z", "H", "RY", "RZ", "P", "GPHASE", "SWAP", "MCU", "OPAQUE")
_DIAGONAL = {"Z", "RZ", "P"}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str
    targets: tuple[int, ...] = ()
    controls: tuple[tuple[int, int], ...] = ()
    params: tuple[float, ...] = ()
    sub: tuple["Gate", ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        cq = [q for q, _ in self.controls]
        if len(set(cq)) != len(cq) or set(cq) & set(self.targets):
            raise CircuitError(f"{self.kind}: controls overlap targets or repeat")
        if any(p not in (0, 1) for _, p in self.controls):
            raise CircuitError("control polarity must be 0 or 1")
        if self.kind == "MCU" and self.sub is None:
            raise CircuitError("MCU requires a sub-circuit")

    def qubits(self) -> set[int]:
        qs = set(self.targets) | {q for q, _ in self.controls}
        if self.sub is not None:
            for g in self.sub:
                qs |= g.qubits()
        return qs

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.targets == other.targets
            and self.controls == other.controls
            and self.params == other.params
            and (self.sub == other.sub)
        )

    __hash__ = object.__hash__


def opaque_gate(targets, perm, phases=None, controls=()) -> Gate:
    """Truth-table gate: |x> -> exp(i*phases[x]) |perm[x]> on ``targets``."""
    perm = [int(p) for p in perm]
    k = len(targets)
    if len(perm) != 2**k or sorted(perm) != list(range(2**k)):
        raise CircuitError("opaque permutation must be a bijection on 2^k states")
    phases = [0.0] * 2**k if phases is None else [float(p) for p in phases]
    return Gate("OPAQUE", tuple(targets), tuple(controls), tuple(float(p) for p in perm) + tuple(phases))


@dataclass(frozen=True, eq=False)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    registers: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        regs = dict(self.registers) or ({"q": (0, self.num_qubits)} if self.num_qubits else {})
        covered = sorted((s, s + n) for s, n in regs.values())
        pos = 0
        for s, e in covered:
            if s != pos:
                raise CircuitError("registers must partition the qubit range")
            pos = e
        if pos != self.num_qubits:
            raise CircuitError("registers must partition the qubit range")
        object.__setattr__(self, "registers", regs)
        for g in self.gates:
            qs = g.qubits()
            if qs and (min(qs) < 0 or max(qs) >= self.num_qubits):
                raise CircuitError(f"gate {g.kind} touches qubit outside [0, {self.num_qubits})")

    def __eq__(self, other):
        return (
            isinstance(other, Circuit)
            and self.num_qubits == other.num_qubits
            and self.registers == other.registers
            and self.gates == other.gates
        )

    __hash__ = object.__hash__

    def register(self, name: str) -> list[int]:
        s, n = self.registers[name]
        return list(range(s, s + n))

    def __len__(self):
        return len(self.gates)


def compose(a: Circuit, b: Circuit) -> Circuit:
    """Apply ``a`` then ``b``; the unitary is U_b @ U_a."""
    if a.num_qubits != b.num_qubits:
        raise CircuitError("compose requires equal widths")
    return Circuit(a.num_qubits, a.gates + b.gates, a.registers)


def _inverse_gates(gates, memo):
    out = []
    for g in reversed(gates):
        k = g.kind
        if k == "MCU":
            key = id(g.sub)
            if key not in memo:
                memo[key] = (g.sub, tuple(_inverse_gates(g.sub, memo)))
            out.append(Gate("MCU", (), g.controls, (), memo[key][1]))
        elif k in ("RY", "RZ", "P", "GPHASE"):
            out.append(Gate(k, g.targets, g.controls, (-g.params[0],)))
        elif k == "OPAQUE":
            m = len(g.params) // 2
            perm = [int(p) for p in g.params[:m]]
            ph = g.params[m:]
            inv = [0] * m
            iph = [0.0] * m
            for x, y in enumerate(perm):
                inv[y] = x
                iph[y] = -ph[x]
            out.append(opaque_gate(g.targets, inv, iph, g.controls))
        else:
            out.append(g)
    return out


def inverse(c: Circuit) -> Circuit:
    return Circuit(c.num_qubits, tuple(_inverse_gates(c.gates, {})), c.registers)


def controlled(c: Circuit, controls, polarities=None, num_qubits=None) -> Circuit:
    """Wrap ``c`` in a single multi-controlled sub-circuit gate.

    ``controls`` may reference qubits beyond ``c.num_qubits``; pass
    ``num_qubits`` to size the result (defaults to the minimal width).
    """
    controls = list(controls)
    polarities = [1] * len(controls) if polarities is None else list(polarities)
    used = set().union(*(g.qubits() for g in c.gates)) if c.gates else set()
    if used & set(controls):
        raise CircuitError("control qubits overlap the controlled circuit")
    nq = num_qubits or max([c.num_qubits] + [q + 1 for q in controls])
    g = Gate("MCU", (), tuple(zip(controls, polarities)), (), c.gates)
    return Circuit(nq, (g,), {} if nq != c.num_qubits else c.registers)


def call(gates, controls=()) -> Gate:
    """Sub-circuit gate sharing ``gates`` by reference."""
    return Gate("MCU", (), tuple(controls), (), tuple(gates))


def remap_gates(gates, mapping, memo=None) -> tuple[Gate, ...]:
    """Relabel qubits through ``mapping`` (sequence or dict)."""
    memo = {} if memo is None else memo
    out = []
    for g in gates:
        ctl = tuple((mapping[q], p) for q, p in g.controls)
        if g.kind == "MCU":
            key = id(g.sub)
            if key not in memo:
                memo[key] = (g.sub, remap_gates(g.sub, mapping, memo))
            out.append(Gate("MCU", (), ctl, (), memo[key][1]))
        else:
            out.append(Gate(g.kind, tuple(mapping[t] for t in g.targets), ctl, g.params))
    return tuple(out)


# ----------------------------------------------------------------------------
# Dense kernel: acts on an array shaped (batch, 2, ..., 2).


def _u2(g):
    k = g.kind
    if k == "H":
        s = 1 / np.sqrt(2)
        return np.array([[s, s], [s, -s]], dtype=complex)
    if k == "RY":
        t = g.params[0]
        return np.array([[cos(t / 2), -sin(t / 2)], [sin(t / 2), cos(t / 2)]], dtype=complex)
    raise AssertionError(k)


def _diag2(g):
    k = g.kind
    if k == "Z":
        return 1.0, -1.0
    if k == "P":
        return 1.0, np.exp(1j * g.params[0])
    if k == "RZ":
        t = g.params[0]
        return np.exp(-0.5j * t), np.exp(0.5j * t)
    raise AssertionError(k)


def _dense_apply(t, g, nq, extra, axis_of):
    controls = g.controls + extra
    if g.kind == "MCU":
        for s in g.sub:
            _dense_apply(t, s, nq, controls, axis_of)
        return
    idx = [slice(None)] * t.ndim
    for q, p in controls:
        idx[axis_of(q)] = slice(p, p + 1)
    view = t[tuple(idx)]
    k = g.kind
    if k == "GPHASE":
        view *= np.exp(1j * g.params[0])
        return
    if k == "OPAQUE":
        tg = g.targets
        axes = [axis_of(q) for q in reversed(tg)]
        moved = np.moveaxis(view, axes, list(range(view.ndim - len(tg), view.ndim)))
        shp = moved.shape
        flat = moved.reshape(shp[: view.ndim - len(tg)] + (2 ** len(tg),))
        m = 2 ** len(tg)
        perm = np.array(g.params[:m], dtype=int)
        ph = np.exp(1j * np.array(g.params[m:]))
        new = np.empty_like(flat)
        new[..., perm] = flat * ph
        view[...] = np.moveaxis(new.reshape(shp), list(range(view.ndim - len(tg), view.ndim)), axes)
        return
    if k == "SWAP":
        a1, a2 = axis_of(g.targets[0]), axis_of(g.targets[1])
        view[...] = np.swapaxes(view, a1, a2).copy()
        return
    a = axis_of(g.targets[0])
    s0 = [slice(None)] * t.ndim
    s1 = [slice(None)] * t.ndim
    s0[a] = 0
    s1[a] = 1
    s0, s1 = tuple(s0), tuple(s1)
    if k == "X":
        view[...] = np.flip(view, axis=a).copy()
    elif k in _DIAGONAL:
        f0, f1 = _diag2(g)
        if f0 != 1.0:
            view[s0] *= f0
        view[s1] *= f1
    else:
        u = _u2(g)
        v0 = view[s0].copy()
        v1 = view[s1].copy()
        view[s0] = u[0, 0] * v0 + u[0, 1] * v1
        view[s1] = u[1, 0] * v0 + u[1, 1] * v1


def _run_dense(c: Circuit, batch: np.ndarray) -> np.ndarray:
    """batch: shape (B, 2^n) with row b a state; returns evolved copy."""
    nq = c.num_qubits
    t = np.array(batch, dtype=complex).reshape((batch.shape[0],) + (2,) * nq)
    ax = lambda q: nq - q  # noqa: E731
    for g in c.gates:
        _dense_apply(t, g, nq, (), ax)
    return t.reshape(batch.shape[0], 2**nq)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    registers: dict = field(default_factory=dict)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0, registers=None):
        a = np.zeros(2**num_qubits, dtype=complex)
        a[index] = 1.0
        return cls(a, registers or {})

    @property
    def num_qubits(self) -> int:
        return int(np.log2(len(self.amplitudes)))


def simulate(c: Circuit, state) -> StateVector:
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    if len(amps) != 2**c.num_qubits:
        raise CircuitError("state dimension does not match circuit width")
    out = _run_dense(c, amps[None, :])[0]
    return StateVector(out, dict(c.registers))


def unitary_of(c: Circuit) -> np.ndarray:
    if c.num_qubits > DENSE_QUBIT_CEILING:
        raise CircuitError(
            f"unitary_of limited to {DENSE_QUBIT_CEILING} qubits; use columnwise extraction"
        )
    return _run_dense(c, np.eye(2**c.num_qubits)).T


# ----------------------------------------------------------------------------
# Row engine: system qubits are tracked per row as a basis value, ancillas are
# a dense axis. Rows are keyed by (column, system value).


def _bits_match(vals, controls):
    m = np.ones(len(vals), dtype=bool)
    for q, p in controls:
        m &= ((vals >> q) & 1) == p
    return m


def _sparse_apply(col, idx, amp, g, extra):
    """Apply a non-MCU gate to sparse triplets over full basis indices."""
    controls = g.controls + extra
    m = _bits_match(idx, controls)
    k = g.kind
    if k == "GPHASE":
        amp = amp.copy()
        amp[m] *= np.exp(1j * g.params[0])
        return col, idx, amp
    if k in _DIAGONAL:
        f0, f1 = _diag2(g)
        b = (idx >> g.targets[0]) & 1
        amp = amp * np.where(m, np.where(b == 1, f1, f0), 1.0)
        return col, idx, amp
    if k == "X":
        return col, np.where(m, idx ^ (1 << g.targets[0]), idx), amp
    if k == "SWAP":
        a, b = g.targets
        ba, bb = (idx >> a) & 1, (idx >> b) & 1
        diff = m & (ba != bb)
        return col, np.where(diff, idx ^ ((1 << a) | (1 << b)), idx), amp
    if k == "OPAQUE":
        tg = g.targets
        n = 2 ** len(tg)
        perm = np.array(g.params[:n], dtype=np.int64)
        ph = np.exp(1j * np.array(g.params[n:]))
        x = np.zeros(len(idx), dtype=np.int64)
        clear = 0
        for i, q in enumerate(tg):
            x |= ((idx >> q) & 1) << i
            clear |= 1 << q
        y = perm[x]
        new = idx & ~np.int64(clear)
        for i, q in enumerate(tg):
            new |= ((y >> i) & 1) << q
        return col, np.where(m, new, idx), np.where(m, amp * ph[x], amp)
    u = _u2(g)
    t = g.targets[0]
    b = (idx >> t) & 1
    keep = ~m
    cm, im, am, bm = col[m], idx[m], amp[m], b[m]
    i0 = im & ~np.int64(1 << t)
    i1 = im | np.int64(1 << t)
    a0 = u[0, bm] * am
    a1 = u[1, bm] * am
    return (
        np.concatenate([col[keep], cm, cm]),
        np.concatenate([idx[keep], i0, i1]),
        np.concatenate([amp[keep], a0, a1]),
    )


class _Rows:
    """State batch over rows keyed by (column, system value)."""

    def __init__(self, ns, na, cols, sysvals, amps):
        self.ns, self.na = ns, na
        self.cols = np.asarray(cols, dtype=np.int64)
        self.sys = np.asarray(sysvals, dtype=np.int64)
        self.amps = amps  # (M, 2**na)
        self._anc_index = np.arange(2**na, dtype=np.int64)

    def apply(self, g, extra=()):
        if g.kind == "MCU":
            ctl = g.controls + extra
            for s in g.sub:
                self.apply(s, ctl)
            return
        ns = self.ns
        controls = g.controls + extra
        if all(t >= ns for t in g.targets):
            self._apply_anc(g, controls)
            return
        if g.kind in _DIAGONAL and all(q < ns for q, _ in controls):
            rows = _bits_match(self.sys, controls)
            f0, f1 = _diag2(g)
            b = (self.sys >> g.targets[0]) & 1
            fac = np.where(rows, np.where(b == 1, f1, f0), 1.0)
            self.amps *= fac[:, None]
            return
        if g.kind in ("X", "SWAP") and all(q < ns for q, _ in controls) and all(t < ns for t in g.targets):
            _, self.sys, _ = _sparse_apply(self.cols, self.sys, np.zeros(len(self.sys)), g, extra)
            return
        if all(t < ns for t in g.targets) and g.kind != "GPHASE":
            self._apply_sys(g, controls)
            return
        self._apply_generic(g, extra)

    def _anc_mask(self, ancc):
        m = np.ones(len(self._anc_index), dtype=bool)
        for q, p in ancc:
            m &= ((self._anc_index >> q) & 1) == p
        return m

    def _keys(self):
        return (self.cols << self.ns) | self.sys

    def _ensure(self, cols, sysv):
        """Add zero rows for (col, sys) keys not present yet."""
        key = self._keys()
        want = np.unique((cols << self.ns) | sysv)
        new = want[~np.isin(want, key)]
        if len(new):
            self.cols = np.concatenate([self.cols, new >> self.ns])
            self.sys = np.concatenate([self.sys, new & ((1 << self.ns) - 1)])
            self.amps = np.concatenate([self.amps, np.zeros((len(new), self.amps.shape[1]), dtype=complex)])

    def _lookup(self, cols, sysv):
        key = self._keys()
        order = np.argsort(key)
        pos = np.searchsorted(key[order], (cols << self.ns) | sysv)
        return order[pos]

    def _apply_sys(self, g, controls):
        """System-targeted gate whose controls may include ancillas.

        Each affected row takes its new amplitudes from a partner row with the
        same column, masked along the ancilla axis.
        """
        ns = self.ns
        sysc = tuple((q, p) for q, p in controls if q < ns)
        ancc = tuple((q - ns, p) for q, p in controls if q >= ns)
        mask = self._anc_mask(ancc)
        if not mask.any():
            return
        k = g.kind
        if k in _DIAGONAL:
            rows = np.nonzero(_bits_match(self.sys, sysc))[0]
            f0, f1 = _diag2(g)
            b = (self.sys[rows] >> g.targets[0]) & 1
            fac = np.where(b == 1, f1, f0)
            sub = self.amps[rows]
            sub[:, mask] *= fac[:, None]
            self.amps[rows] = sub
            return
        if k in ("H", "RY"):
            bit = np.int64(1 << g.targets[0])
            rows = _bits_match(self.sys, sysc)
            self._ensure(self.cols[rows], self.sys[rows] ^ bit)
            rows = np.nonzero(_bits_match(self.sys, sysc))[0]
            part = self._lookup(self.cols[rows], self.sys[rows] ^ bit)
            u = _u2(g)
            b = (self.sys[rows] >> g.targets[0]) & 1
            a_self = self.amps[rows][:, mask]
            a_part = self.amps[part][:, mask]
            sub = self.amps[rows]
            sub[:, mask] = u[b, b][:, None] * a_self + u[b, 1 - b][:, None] * a_part
            self.amps[rows] = sub
            self._prune()
            return
        # Permutations (X, SWAP, OPAQUE) of the target bits, with phases.
        rows = _bits_match(self.sys, sysc)
        src_cols, src_sys = self.cols[rows], self.sys[rows]
        _, dst, ph = _sparse_apply(src_cols, src_sys, np.ones(len(src_sys), dtype=complex),
                                   Gate(k, g.targets, (), g.params), ())
        self._ensure(src_cols, dst)
        # Rows added by _ensure are empty, so only the original rows move.
        rows = self._lookup(src_cols, src_sys)
        sel = self.amps[rows][:, mask].copy()
        dpos = self._lookup(src_cols, dst)
        sub = self.amps[rows]
        sub[:, mask] = 0
        self.amps[rows] = sub
        tgt = self.amps[dpos]
        tgt[:, mask] = sel * ph[:, None]
        self.amps[dpos] = tgt
        self._prune()

    def _prune(self):
        if len(self.amps) > 64:
            keep = np.abs(self.amps).max(axis=1) > 1e-15
            if not keep.all():
                self.cols, self.sys, self.amps = self.cols[keep], self.sys[keep], self.amps[keep]

    def _apply_anc(self, g, controls):
        ns, na = self.ns, self.na
        sysc = tuple((q, p) for q, p in controls if q < ns)
        ancc = tuple((q - ns, p) for q, p in controls if q >= ns)
        local = Gate(g.kind, tuple(t - ns for t in g.targets), ancc, g.params)
        ax = lambda q: na - q  # noqa: E731
        if sysc:
            rows = np.nonzero(_bits_match(self.sys, sysc))[0]
            if len(rows) == 0:
                return
            sub = self.amps[rows].reshape((len(rows),) + (2,) * na)
            _dense_apply(sub, local, na, (), ax)
            self.amps[rows] = sub.reshape(len(rows), 2**na)
        else:
            t = self.amps.reshape((len(self.amps),) + (2,) * na)
            _dense_apply(t, local, na, (), ax)

    def _apply_generic(self, g, extra):
        ns, na = self.ns, self.na
        r, a = np.nonzero(np.abs(self.amps) > 0)
        amp = self.amps[r, a]
        idx = self.sys[r] | (a.astype(np.int64) << ns)
        col, idx, amp = _sparse_apply(self.cols[r], idx, amp, g, extra)
        self._regroup(col, idx, amp)

    def _regroup(self, col, idx, amp):
        ns, na = self.ns, self.na
        sysv = idx & ((1 << ns) - 1)
        anc = idx >> ns
        key = (col << ns) | sysv
        uk, inv = np.unique(key, return_inverse=True)
        amps = np.zeros((len(uk), 2**na), dtype=complex)
        np.add.at(amps, (inv, anc), amp)
        keep = np.abs(amps).max(axis=1) > 1e-15 if len(uk) else np.zeros(0, dtype=bool)
        uk = uk[keep]
        self.amps = amps[keep]
        self.cols = uk >> ns
        self.sys = uk & ((1 << ns) - 1)


def _run_rows(c: Circuit, ns: int, cols, sysvals, init) -> _Rows:
    rows = _Rows(ns, c.num_qubits - ns, cols, sysvals, init)
    for g in c.gates:
        rows.apply(g)
    return rows


def project_columns(c: Circuit, ns: int, columns, chunk_budget: int = 1 << 22, workers: int = 1) -> np.ndarray:
    """Matrix of <0_anc, i | U | 0_anc, k> for k in ``columns``.

    Ancillas are the qubits at positions >= ns. The full unitary is never
    materialized; columns are processed in chunks, on ``workers`` threads.
    """
    if not 0 <= ns <= c.num_qubits:
        raise CircuitError("system width exceeds the circuit width")
    na = c.num_qubits - ns
    columns = list(columns)
    out = np.zeros((2**ns, len(columns)), dtype=complex)
    step = max(1, chunk_budget // (4 * 2**na))
    if workers > 1:
        step = max(1, min(step, -(-len(columns) // workers)))

    def run(s):
        ks = np.array(columns[s : s + step], dtype=np.int64)
        init = np.zeros((len(ks), 2**na), dtype=complex)
        init[:, 0] = 1.0
        return _run_rows(c, ns, np.arange(len(ks)) + s, ks, init)

    starts = range(0, len(columns), step)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = map(run, starts)
    for rows in results:
        out[rows.sys, rows.cols] += rows.amps[:, 0]
    return out


def apply_with_ancillas(c: Circuit, ns: int, sys_state: np.ndarray) -> np.ndarray:
    """Ancilla-zero projection of U(|0>_anc ⊗ sys_state), returned over system."""
    if not 0 <= ns <= c.num_qubits:
        raise CircuitError("system width exceeds the circuit width")
    na = c.num_qubits - ns
    nz = np.nonzero(np.abs(sys_state) > 0)[0]
    init = np.zeros((len(nz), 2**na), dtype=complex)
    init[:, 0] = sys_state[nz]
    rows = _run_rows(c, ns, np.zeros(len(nz), dtype=np.int64), nz, init)
    out = np.zeros(2**ns, dtype=complex)
    np.add.at(out, rows.sys, rows.amps[:, 0])
    return out


# ----------------------------------------------------------------------------
# Resources


def toffoli_cost(width: int) -> int:
    if width <= 1:
        return 0
    if width == 2:
        return 1
    return 2 * (width - 2) + 1


@dataclass(frozen=True)
class ResourceReport:
    toffoli_estimate: int
    mcx_histogram: dict
    ancilla_count: int
    gate_total: int
    depth: int
    rotation_count: int = 0
    opaque_count: int = 0

    @property
    def has_opaque(self) -> bool:
        return self.opaque_count > 0

    def to_dict(self) -> dict:
        return {
            "toffoli_estimate": self.toffoli_estimate,
            "mcx_histogram": {str(k): v for k, v in sorted(self.mcx_histogram.items())},
            "ancilla_count": self.ancilla_count,
            "gate_total": self.gate_total,
            "depth": self.depth,
            "rotation_count": self.rotation_count,
            "opaque_count": self.opaque_count,
        }


def _effective_width(g, nctl):
    k = g.kind
    if k == "GPHASE":
        return nctl - 1
    if k == "SWAP":
        return nctl + 1 if nctl else 0
    return nctl


def _count(gates, extra, memo):
    key = (id(gates), extra)
    if key in memo:
        return memo[key][1]
    tof = tot = rot = opq = 0
    hist: dict[int, int] = {}
    for g in gates:
        nctl = len(g.controls) + extra
        if g.kind == "MCU":
            t, h, n, r, o = _count(g.sub, nctl, memo)
            tof += t
            tot += n
            rot += r
            opq += o
            for w, v in h.items():
                hist[w] = hist.get(w, 0) + v
            continue
        tot += 1
        if g.kind == "OPAQUE":
            opq += 1
            continue
        if g.kind in ("RY", "RZ", "P"):
            rot += 1
            continue
        if g.kind == "GPHASE":
            if nctl and abs(abs(g.params[0]) - np.pi) > 1e-12:
                rot += 1
        w = _effective_width(g, nctl)
        if g.kind == "H" and w <= 1:
            continue
        if w >= 1:
            hist[w] = hist.get(w, 0) + (3 if g.kind == "SWAP" and nctl == 0 else 1)
            tof += toffoli_cost(w)
    res = (tof, hist, tot, rot, opq)
    memo[key] = (gates, res)
    return res


def count_resources(c: Circuit, ancilla_count: int = 0) -> ResourceReport:
    tof, hist, tot, rot, opq = _count(c.gates, 0, {})
    return ResourceReport(tof, dict(hist), ancilla_count, tot, tot, rot, opq)


# ----------------------------------------------------------------------------
# Text format


def _fmt_gate(g, out, subs):
    tg = ",".join(str(t) for t in g.targets)
    ct = ",".join(f"({q},{p})" for q, p in g.controls)
    pr = ",".join(repr(float(p)) for p in g.params)
    line = f"GATE {g.kind} targets=[{tg}] controls=[{ct}] params=[{pr}]"
    if g.kind == "MCU":
        line += f" sub={subs[id(g.sub)]}"
    out.append(line)


def _collect_subs(gates, order, seen):
    """Post-order list of distinct MCU bodies, deduplicated by identity."""
    for g in gates:
        if g.kind == "MCU" and id(g.sub) not in seen:
            _collect_subs(g.sub, order, seen)
            seen[id(g.sub)] = len(order)
            order.append(g.sub)


def to_text(c: Circuit) -> str:
    """Line format; each shared MCU body is written once as a numbered SUB block."""
    out = [f"CIRCUIT num_qubits={c.num_qubits}"]
    for name, (s, n) in c.registers.items():
        out.append(f"REGISTER {name} start={s} size={n}")
    order: list = []
    subs: dict = {}
    _collect_subs(c.gates, order, subs)
    for k, body in enumerate(order):
        out.append(f"SUB {k} BEGIN")
        for g in body:
            _fmt_gate(g, out, subs)
        out.append("END")
    for g in c.gates:
        _fmt_gate(g, out, subs)
    return "\n".join(out) + "\n"


_GATE_RE = re.compile(
    r"^GATE (\w+) targets=\[([^\]]*)\] controls=\[([^\]]*)\] params=\[([^\]]*)\]( sub=(\d+))?$"
)


def from_text(text: str) -> Circuit:
    """Inverse of ``to_text``; lines starting with '#' are ignored."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("CIRCUIT "):
        raise CircuitError("missing CIRCUIT header")
    nq = int(lines[0].split("=")[1])
    regs = {}
    subs: dict[int, tuple] = {}
    body: list | None = None
    top: list = []
    current = None
    for ln in lines[1:]:
        if ln.startswith("REGISTER "):
            _, name, s, n = ln.split()
            regs[name] = (int(s.split("=")[1]), int(n.split("=")[1]))
            continue
        if ln.startswith("SUB "):
            if body is not None:
                raise CircuitError("nested SUB definitions")
            current, body = int(ln.split()[1]), []
            continue
        if ln == "END":
            if body is None:
                raise CircuitError("END without SUB")
            subs[current] = tuple(body)
            body = None
            continue
        m = _GATE_RE.match(ln)
        if not m:
            raise CircuitError(f"cannot parse line: {ln}")
        kind = m.group(1)
        tg = tuple(int(x) for x in m.group(2).split(",") if x)
        ct = tuple((int(a), int(b)) for a, b in re.findall(r"\((\d+),(\d+)\)", m.group(3)))
        pr = tuple(float(x) for x in m.group(4).split(",") if x)
        sub = None
        if kind == "MCU":
            if m.group(6) is None or int(m.group(6)) not in subs:
                raise CircuitError(f"MCU refers to an undefined SUB: {ln}")
            sub = subs[int(m.group(6))]
        (top if body is None else body).append(Gate(kind, tg, ct, pr, sub))
    if body is not None:
        raise CircuitError("unterminated SUB block")
    return Circuit(nq, tuple(top), regs)
