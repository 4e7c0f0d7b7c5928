"""Linear combination of unitaries, block extraction and combinators.

Qubit layout of every encoding, from least significant: system register,
clean workspace (used by ladder incrementers, always returned to zero), then
the LCU ancillas. The encoded block is the ancilla-and-workspace-zero block;
``extract_block`` returns it without the factor lambda.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circuit import (
    Circuit,
    Gate,
    apply_with_ancillas,
    call,
    count_resources,
    project_columns,
    remap_gates,
)
from .primitives import CoefficientVector, nbits, prep_gates

EXTRACT_SYSTEM_CEILING = 12


class EncodingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    circuit: Circuit
    lam: float
    system_qubits: int
    work_qubits: int = 0
    descriptor: str = ""
    meta: dict = field(default_factory=dict)
    # builder(ctl) -> gates of this encoding controlled on ``ctl``, whose
    # qubits are numbered from circuit.num_qubits upward. Lets PREP/PREP^dagger
    # and other self-cancelling pairs stay uncontrolled.
    builder: Callable | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise EncodingError("subnormalization must be positive")
        if self.circuit.num_qubits < self.system_qubits + self.work_qubits:
            raise EncodingError("circuit narrower than system plus workspace")

    @property
    def q(self) -> int:
        """Total ancilla count (workspace plus LCU ancillas)."""
        return self.circuit.num_qubits - self.system_qubits

    @property
    def lcu_qubits(self) -> int:
        return self.circuit.num_qubits - self.system_qubits - self.work_qubits

    @property
    def gates(self):
        return self.circuit.gates

    def placed(self, sys_map, work_map, anc_map, controls=()) -> Gate:
        """This encoding as one sub-circuit gate on the given qubits."""
        ns, nw = self.system_qubits, self.work_qubits
        if len(sys_map) != ns or len(work_map) < nw or len(anc_map) < self.lcu_qubits:
            raise EncodingError("placement maps too small")
        mapping = list(sys_map) + list(work_map[:nw]) + list(anc_map[: self.lcu_qubits])
        if controls and self.builder is not None:
            nq = self.circuit.num_qubits
            local = [(nq + t, p) for t, (_, p) in enumerate(controls)]
            return call(remap_gates(self.builder(local), mapping + [q for q, _ in controls]))
        return call(remap_gates(self.gates, mapping), controls)

    def controlled_gates(self, ctl) -> list[Gate]:
        """Gates of this encoding in its own coordinates, controlled on ``ctl``."""
        if not ctl:
            return list(self.gates)
        ns, nw = self.system_qubits, self.work_qubits
        return [self.placed(list(range(ns)), list(range(ns, ns + nw)),
                            list(range(ns + nw, self.circuit.num_qubits)), tuple(ctl))]

    def with_meta(self, **meta) -> "BlockEncoding":
        return BlockEncoding(self.circuit, self.lam, self.system_qubits, self.work_qubits, self.descriptor,
                             {**self.meta, **meta}, self.builder)

    def relabeled(self, lam: float, descriptor: str) -> "BlockEncoding":
        return BlockEncoding(self.circuit, float(lam), self.system_qubits, self.work_qubits, descriptor,
                             dict(self.meta), self.builder)

    def resources(self):
        return count_resources(self.circuit, self.q)


def make_encoding(gates, lam, ns, nw, nanc, descriptor="", registers=None, meta=None, builder=None) -> BlockEncoding:
    """Encoding from a gate list; with ``builder``, ``gates`` defaults to builder(())."""
    if gates is None:
        gates = builder(())
    regs = {"sys": (0, ns)}
    if nw:
        regs["work"] = (ns, nw)
    if nanc:
        regs["anc"] = (ns + nw, nanc)
    if registers:
        regs = registers
    return BlockEncoding(Circuit(ns + nw + nanc, tuple(gates), regs), float(lam), ns, nw, descriptor, meta or {},
                         builder)


def _index_controls(anc, i):
    return tuple((q, (i >> b) & 1) for b, q in enumerate(anc))


def lcu(c: CoefficientVector | list, unitaries, work_qubits: int = 0, descriptor: str = "",
        select_flag: bool = False) -> BlockEncoding:
    """PREP^dagger SEL PREP over ``unitaries``.

    Each unitary is a Circuit on [system | workspace] with ``work_qubits``
    workspace qubits; negative coefficients become a controlled phase pi.
    ``select_flag`` works as in be_add, with the flag as the last workspace qubit.
    """
    c = c if isinstance(c, CoefficientVector) else CoefficientVector(tuple(c))
    if len(unitaries) != len(c):
        raise EncodingError("need one unitary per coefficient")
    widths = {u.num_qubits for u in unitaries}
    if len(widths) != 1:
        raise EncodingError("unitaries must share a width")
    width = widths.pop()
    ns = width - work_qubits
    m = nbits(len(c))
    use_flag = bool(select_flag and m)
    sf = width
    anc = list(range(width + use_flag, width + use_flag + m))
    prep = prep_gates(anc, c.magnitudes) if m else []
    unprep = _inv(prep)

    def build(ctl):
        ctl = tuple(ctl)
        gates: list[Gate] = list(prep)
        for i, (u, s) in enumerate(zip(unitaries, c.signs)):
            if s == 0:
                continue
            sel = ctl + _index_controls(anc, i)
            mark = Gate("X", (sf,), sel) if use_flag and u.gates and len(sel) > 1 else None
            if mark is not None:
                gates.append(mark)
                sel = ((sf, 1),)
            if u.gates and sel:
                gates.append(call(u.gates, sel))
            elif u.gates:
                gates += list(u.gates)
            if s < 0:
                gates.append(Gate("GPHASE", (), sel, (np.pi,)))
            if mark is not None:
                gates.append(mark)
        return gates + unprep

    return make_encoding(None, c.lam, ns, work_qubits + use_flag, m, descriptor, builder=build)


def _inv(gates):
    from .circuit import _inverse_gates

    return _inverse_gates(gates, {})


def _aligned(encodings):
    ns = {e.system_qubits for e in encodings}
    if len(ns) != 1:
        raise EncodingError("encodings must share the system width")
    return ns.pop(), max(e.work_qubits for e in encodings), max(e.lcu_qubits for e in encodings)


def be_add(encodings, weights, descriptor: str = "", select_flag: bool = False) -> BlockEncoding:
    """Block sum_i w_i lam_i B_i / lam_out with lam_out = sum_i |w_i| lam_i.

    With ``select_flag`` each selection condition is ANDed into one extra
    clean workspace qubit, so a term sees a single control instead of the
    full index pattern. Worth it when the terms are large.
    """
    encodings = list(encodings)
    w = np.asarray(weights.values if isinstance(weights, CoefficientVector) else weights, dtype=float)
    if len(w) != len(encodings):
        raise EncodingError("need one weight per encoding")
    ns, nw, na = _aligned(encodings)
    eff = CoefficientVector(tuple(w * np.array([e.lam for e in encodings])))
    m = nbits(len(encodings))
    use_flag = bool(select_flag and m)
    nw_out = nw + int(use_flag)
    sf = ns + nw
    inner = list(range(ns + nw_out, ns + nw_out + na))
    outer = list(range(ns + nw_out + na, ns + nw_out + na + m))
    sysq, work = list(range(ns)), list(range(ns, ns + nw))
    prep = prep_gates(outer, eff.magnitudes) if m else []
    unprep = _inv(prep)

    def build(ctl):
        ctl = tuple(ctl)
        gates = list(prep)
        for i, (e, s) in enumerate(zip(encodings, eff.signs)):
            if s == 0:
                continue
            sel = ctl + _index_controls(outer, i)
            mark = Gate("X", (sf,), sel) if use_flag and len(sel) > 1 else None
            if mark is not None:
                gates.append(mark)
                sel = ((sf, 1),)
            gates.append(e.placed(sysq, work, inner, sel))
            if s < 0:
                gates.append(Gate("GPHASE", (), sel, (np.pi,)))
            if mark is not None:
                gates.append(mark)
        return gates + unprep

    return make_encoding(None, eff.lam, ns, nw_out, na + m, descriptor or "sum", builder=build)


def be_multiply(a: BlockEncoding, b: BlockEncoding, descriptor: str = "") -> BlockEncoding:
    """Block B_a B_b (b acts first), lam = lam_a lam_b, one flag qubit."""
    ns, nw, na = _aligned([a, b])
    sysq, work = list(range(ns)), list(range(ns, ns + nw))
    anc = list(range(ns + nw, ns + nw + na))
    use_flag = bool(b.lcu_qubits and a.lcu_qubits)
    flag = ns + nw + na

    def build(ctl):
        # The flag gadget leaves the flag clean when b is not applied, so it needs no control.
        ctl = tuple(ctl)
        gates = [b.placed(sysq, work, anc, ctl)]
        if use_flag:
            gates.append(Gate("X", (flag,)))
            gates.append(Gate("X", (flag,), tuple((q, 0) for q in anc[: b.lcu_qubits])))
        gates.append(a.placed(sysq, work, anc, ctl))
        return gates

    return make_encoding(None, a.lam * b.lam, ns, nw, na + int(use_flag), descriptor or "product", builder=build)


def unitary_encoding(c: Circuit, work_qubits: int = 0, descriptor: str = "", lam: float = 1.0) -> BlockEncoding:
    return make_encoding(c.gates, lam, c.num_qubits - work_qubits, work_qubits, 0, descriptor)


def scaled_identity(ns: int, value: float, descriptor: str = "") -> BlockEncoding:
    """value * I as a (|value|, 0)-encoding; sign carried by a global phase."""
    if value == 0:
        ident = Circuit(ns, ())
        return lcu([0.5, -0.5], [ident, ident], 0, descriptor or "0*I")
    gates = [Gate("GPHASE", (), (), (np.pi,))] if value < 0 else []
    return make_encoding(gates, abs(value), ns, 0, 0, descriptor or f"{value}*I")


def thread_count() -> int:
    """Worker threads for column extraction, capped by ELLIPQBE_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("ELLIPQBE_THREADS", "1")))
    except ValueError:
        return 1


def _rows(be: BlockEncoding) -> int:
    return be.system_qubits + be.work_qubits


def extract_block(be: BlockEncoding, ceiling: int = EXTRACT_SYSTEM_CEILING) -> np.ndarray:
    """Raw block <0|U|0> (not multiplied by lambda), column by column."""
    ns = be.system_qubits
    if ns > ceiling:
        raise EncodingError(f"system width {ns} exceeds extraction ceiling {ceiling}")
    return project_columns(be.circuit, _rows(be), range(2**ns), workers=thread_count())[: 2**ns, :]


def apply_block(be: BlockEncoding, state) -> np.ndarray:
    ns = be.system_qubits
    v = np.zeros(2 ** _rows(be), dtype=complex)
    v[: 2**ns] = np.asarray(state)
    return apply_with_ancillas(be.circuit, _rows(be), v)[: 2**ns]


def success_probability(be: BlockEncoding, state) -> float:
    s = np.asarray(state if not hasattr(state, "amplitudes") else state.amplitudes, dtype=complex)
    if abs(np.linalg.norm(s) - 1) > 1e-9:
        raise EncodingError("input state must be normalized")
    return float(np.linalg.norm(apply_block(be, s)) ** 2)


def verification_report(be: BlockEncoding, target: np.ndarray, block: np.ndarray | None = None) -> dict:
    block = extract_block(be) if block is None else block
    err = float(np.max(np.abs(be.lam * block - np.asarray(target)))) if block.size else 0.0
    res = be.resources()
    return {
        "descriptor": be.descriptor,
        "lambda": be.lam,
        "q": be.q,
        "system_qubits": be.system_qubits,
        "max_abs_error": err,
        "toffoli_estimate": res.toffoli_estimate,
        "opaque_gates": res.opaque_count,
    }


__all__ = [
    "BlockEncoding",
    "EncodingError",
    "apply_block",
    "be_add",
    "be_multiply",
    "extract_block",
    "lcu",
    "make_encoding",
    "scaled_identity",
    "success_probability",
    "unitary_encoding",
    "verification_report",
]
