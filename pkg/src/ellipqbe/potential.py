"""Position, distance and pair-potential encodings.

A pair (i, j) of particles in dimension d occupies registers i*d + k and
j*d + k. Squared distances are encoded with block value y/4, where y is the
squared grid distance divided by d (N-1)^2, so y lies in [0, 1].
"""
from __future__ import annotations

from math import isqrt, sqrt

import numpy as np

from . import fd_reference as fd
from .block_encoding import (
    BlockEncoding,
    EncodingError,
    be_add,
    be_multiply,
    lcu,
    make_encoding,
)
from .circuit import Circuit, Gate, call, opaque_gate
from .primitives import compare_gates, diff_gates, nbits, shift_gates, work_size
from .qsp import PolynomialApprox, QspPhases, chebyshev_fit, qsp_apply, qsp_phases


def _tag(be: BlockEncoding, **meta) -> BlockEncoding:
    return be.with_meta(**meta)


def _reg(slot, n):
    return list(range(slot * n, slot * n + n))


def position_on(qubits, ns: int) -> BlockEncoding:
    """X = (N-1)/2 I - (1/2) sum_m 2^m Z_m on ``qubits`` of an ns-qubit system."""
    n = len(qubits)
    N = 2**n
    coeffs = [(N - 1) / 2] + [-(2**m) / 2 for m in range(n)]
    units = [Circuit(ns, ())] + [Circuit(ns, (Gate("Z", (q,)),)) for q in qubits]
    be = lcu(coeffs, units, 0, f"position(n={n})")
    return _tag(be, hermitian=True, diagonal=True)


def position_be(n: int) -> BlockEncoding:
    if n < 1:
        raise EncodingError("n must be >= 1")
    return position_on(list(range(n)), n)


def diff_on(qi, qj, ns: int) -> BlockEncoding:
    n = len(qi)
    be = be_add([position_on(qi, ns), position_on(qj, ns)], [1.0, -1.0], f"diff_position(n={n})")
    return _tag(be, hermitian=True, diagonal=True)


def diff_position_be(n: int) -> BlockEncoding:
    """diag (i - j) / (2(N-1)) with i on the low register."""
    return diff_on(_reg(0, n), _reg(1, n), 2 * n)


def sq_distance_pair_be(n: int, d: int, eta: int, i: int, j: int) -> BlockEncoding:
    """sum_k (alpha^i_k - alpha^j_k)^2 / (4 d (N-1)^2) on eta*d registers."""
    ns = n * d * eta
    terms = []
    for k in range(d):
        df = diff_on(_reg(i * d + k, n), _reg(j * d + k, n), ns)
        terms.append(be_multiply(df, df, f"diff^2(k={k})"))
    be = terms[0] if d == 1 else be_add(terms, [1.0] * d, f"sq_distance(n={n},d={d})")
    return _tag(be, hermitian=True, diagonal=True)


def sq_distance_dd_be(n: int, d: int) -> BlockEncoding:
    return sq_distance_pair_be(n, d, 2, 0, 1)


def conjugate_by_shift(be: BlockEncoding, qubits, l: int, descriptor: str = "") -> BlockEncoding:
    """S^{-l} B S^{l} on ``qubits``: the k-th coordinate is read as (alpha + l) mod N."""
    ns = be.system_qubits
    nw = max(be.work_qubits, work_size(len(qubits)))
    work = list(range(ns, ns + nw))
    anc = list(range(ns + nw, ns + nw + be.lcu_qubits))
    fwd = shift_gates(qubits, l, work)
    back = shift_gates(qubits, -l, work)

    def build(ctl):
        return [call(fwd), be.placed(list(range(ns)), work, anc, tuple(ctl)), call(back)]

    out = make_encoding(None, be.lam, ns, nw, be.lcu_qubits, descriptor or be.descriptor + f"*S^{l}",
                        builder=build)
    return _tag(out, **be.meta)


def shifted_sq_distance_pair_be(n, d, eta, i, j, k, l) -> BlockEncoding:
    be = sq_distance_pair_be(n, d, eta, i, j)
    if l == 0:
        return be
    return conjugate_by_shift(be, _reg(i * d + k, n), l, f"sq_distance_shift(k={k},l={l})")


def shifted_sq_distance_be(n: int, d: int, k: int, l: int) -> BlockEncoding:
    if k >= d:
        raise EncodingError("k must be < d")
    return shifted_sq_distance_pair_be(n, d, 2, 0, 1, k, l)


# ----------------------------------------------------------------------------
# Potentials as polynomials of the encoded value x = y/4


def potential_target(spec: fd.PotentialSpec):
    """V as an even function of the encoded value x, clamped, normalized by spec.scale."""

    def f(x):
        return fd.potential_of_y(spec, np.minimum(4 * np.abs(np.asarray(x, dtype=float)), 1.0))

    return f


def fit_potential(spec: fd.PotentialSpec, degree: int, window=(0.0, 0.25), outside_weight: float = 1.0) -> PolynomialApprox:
    """Even polynomial for ``potential_target`` certified on the encoded window."""
    if spec.kind == "quadratic":
        raise EncodingError("the quadratic potential is encoded exactly; no fit needed")
    return chebyshev_fit(potential_target(spec), degree, window, "extend", "even", outside_weight)


def potential_of_encoding(dist: BlockEncoding, spec: fd.PotentialSpec, poly: PolynomialApprox | QspPhases | None):
    """V(block) as an encoding: quadratic reuses the distance circuit with lambda 4."""
    if spec.kind == "quadratic" and poly is None:
        return dist.relabeled(4.0 / spec.scale, "quadratic_potential")
    if poly is None:
        raise EncodingError("a polynomial is required for non-quadratic potentials")
    return qsp_apply(dist, poly, f"V[{spec.kind}]")


def potential_be(n: int, d: int, spec: fd.PotentialSpec, poly=None) -> BlockEncoding:
    return potential_of_encoding(sq_distance_dd_be(n, d), spec, poly)


def poly_error(spec: fd.PotentialSpec, poly) -> float:
    if poly is None:
        return 0.0
    p = poly if isinstance(poly, PolynomialApprox) else poly.target
    return float(p.sup_error) if p is not None else 0.0


# ----------------------------------------------------------------------------
# Piecewise potential


def band_bits(n: int, d: int, spec: fd.PotentialSpec) -> tuple[int, int]:
    """Integer cut-offs on the squared grid distance, inclusive upper ends."""
    lam = d * (2**n - 1) ** 2
    t = 1e-12
    return int(np.floor(spec.r_min**2 * lam + t)), int(np.floor(spec.r_max**2 * lam + t))


def piecewise_dom_gates(i, j, flags, scratch, r_min_bits: int, r_max_bits: int) -> list[Gate]:
    """flags ^= band of |i - j|: 00 for <= r_min, 01 for (r_min, r_max], 10 above.

    ``scratch`` holds n + 4 clean qubits (order flag, carry, t1, t2, constant
    register) and is returned clean.
    """
    i, j = list(i), list(j)
    n = len(i)
    N = 2**n
    if not r_min_bits < r_max_bits:
        raise EncodingError("need r_min_bits < r_max_bits")
    g, carry, t1, t2 = scratch[:4]
    const = list(scratch[4 : 4 + n])
    comp = compare_gates(i, j, g, carry)
    swap = [Gate("SWAP", (a, b), ((g, 0),)) for a, b in zip(i, j)]
    dif = diff_gates(i, j, carry)

    def against(value, flag):
        if value >= N:
            return []
        load = [Gate("X", (const[b],)) for b in range(n) if (value >> b) & 1]
        return load + compare_gates(j, const, flag, carry) + load

    compute = comp + swap + dif + against(r_min_bits + 1, t1) + against(r_max_bits + 1, t2)
    fl, fh = flags
    write = [Gate("X", (fh,), ((t2, 1),)), Gate("X", (fl,), ((t1, 1), (t2, 0)))]
    from .block_encoding import _inv

    return compute + write + list(_inv(compute))


def piecewise_dom(n: int, r_min_bits: int, r_max_bits: int) -> Circuit:
    regs = {"i": (0, n), "j": (n, n), "flags": (2 * n, 2), "scratch": (2 * n + 2, n + 4)}
    g = piecewise_dom_gates(range(n), range(n, 2 * n), (2 * n, 2 * n + 1),
                            list(range(2 * n + 2, 3 * n + 6)), r_min_bits, r_max_bits)
    return Circuit(3 * n + 6, tuple(g), regs)


def band_of(s2: int, lo: int, hi: int) -> int:
    return 0 if s2 <= lo else (1 if s2 <= hi else 2)


def opaque_dom_gate(n: int, d: int, eta: int, i: int, j: int, flags, lo: int, hi: int) -> Gate:
    """Truth-table banding of the squared distance of pair (i, j)."""
    qubits = []
    for k in range(d):
        qubits += _reg(i * d + k, n) + _reg(j * d + k, n)
    targets = qubits + list(flags)
    m = len(qubits)
    N = 2**n
    perm = np.empty(2 ** (m + 2), dtype=np.int64)
    for x in range(2**m):
        s2 = 0
        for k in range(d):
            a = (x >> (2 * k * n)) & (N - 1)
            b = (x >> ((2 * k + 1) * n)) & (N - 1)
            s2 += (a - b) ** 2
        band = band_of(s2, lo, hi)
        for f in range(4):
            perm[x | (f << m)] = x | ((f ^ band) << m)
    return opaque_gate(targets, perm.tolist())


def _damp(q, ratio, ctl):
    theta = 2 * np.arccos(np.clip(ratio, 0.0, 1.0))
    return [Gate("RY", (q,), ctl, (theta,))] if theta else []


def piecewise_potential_be(n: int, d: int, spec: fd.PotentialSpec, poly, eta: int = 2, i: int = 0, j: int = 1,
                           oracle: str = "auto") -> BlockEncoding:
    """V(r_min) on the inner band, P on the middle band, V(r_max) outside.

    The comparator oracle is used for d = 1 and a truth-table oracle for
    d >= 2 (``oracle`` = "circuit" or "opaque" forces one).
    """
    dist = sq_distance_pair_be(n, d, eta, i, j)
    mid = potential_of_encoding(dist, spec, poly)
    lo, hi = band_bits(n, d, spec)
    c_in = float(fd.potential_value(spec, spec.r_min))
    c_out = float(fd.potential_value(spec, spec.r_max))
    lam = max(abs(c_in), abs(c_out), mid.lam)
    ns = dist.system_qubits
    use_circuit = (oracle == "circuit") or (oracle == "auto" and d == 1)
    if use_circuit and d != 1:
        raise EncodingError("the comparator oracle handles d = 1 only")
    scratch_n = n + 4 if use_circuit else 0
    nw = max(mid.work_qubits, scratch_n)
    work = list(range(ns, ns + nw))
    anc0 = ns + nw
    mid_anc = list(range(anc0, anc0 + mid.lcu_qubits))
    flags = (anc0 + mid.lcu_qubits, anc0 + mid.lcu_qubits + 1)
    damp = anc0 + mid.lcu_qubits + 2
    if use_circuit:
        dom = piecewise_dom_gates(_reg(i, n), _reg(j, n), flags, work[:scratch_n], isqrt(lo), isqrt(hi))
        dom = [call(dom)]
    else:
        dom = [opaque_dom_gate(n, d, eta, i, j, flags, lo, hi)]
    f00 = ((flags[0], 0), (flags[1], 0))
    f01 = ((flags[0], 1), (flags[1], 0))
    f10 = ((flags[0], 0), (flags[1], 1))

    def build(outer):
        outer = tuple(outer)
        gates = list(dom)
        for ctl, value in ((f00, c_in), (f10, c_out)):
            gates += _damp(damp, abs(value) / lam, outer + ctl)
            if value < 0:
                gates.append(Gate("GPHASE", (), outer + ctl, (np.pi,)))
        gates.append(mid.placed(list(range(ns)), work, mid_anc, outer + f01))
        gates += _damp(damp, mid.lam / lam, outer + f01)
        return gates + dom

    out = make_encoding(None, lam, ns, nw, mid.lcu_qubits + 3, f"piecewise_potential(n={n},d={d})", builder=build)
    return _tag(out, hermitian=True, diagonal=True)


def piecewise_reference(n: int, d: int, spec: fd.PotentialSpec, poly, eta: int = 2, i: int = 0, j: int = 1):
    """Classical diagonal the piecewise encoding realizes (poly on the middle band)."""
    lo, hi = band_bits(n, d, spec)
    lam_y = d * (2**n - 1) ** 2
    c_in = float(fd.potential_value(spec, spec.r_min))
    c_out = float(fd.potential_value(spec, spec.r_max))

    def value(s2):
        b = band_of(s2, lo, hi)
        if b == 0:
            return c_in
        if b == 2:
            return c_out
        x = s2 / lam_y / 4
        if poly is None:
            return 4 * x
        p = poly if isinstance(poly, PolynomialApprox) else poly.target
        return float(p(x))

    return fd.pair_potential_diag(n, d, None, i, j, eta, value=value)


# ----------------------------------------------------------------------------
# Gradient


def grad_component_be(n, d, eta, a, spec, poly, i, j, k) -> BlockEncoding:
    """sum_{1<=|l|<=a} c_l V(alpha^i + l e_k, alpha^j), lambda = beta * lambda_V."""
    c = fd.first_derivative_coefficients(a)
    parts, weights = [], []
    for l, cl in zip(range(-a, a + 1), c):
        if l == 0 or cl == 0:
            continue
        dist = shifted_sq_distance_pair_be(n, d, eta, i, j, k, l)
        parts.append(potential_of_encoding(dist, spec, poly))
        weights.append(cl)
    nw = max(p.work_qubits for p in parts)
    parts = [_pad_work(p, nw) for p in parts]
    be = be_add(parts, weights, f"grad_V(k={k})")
    return _tag(be, hermitian=True, diagonal=True)


def _pad_work(be: BlockEncoding, nw: int) -> BlockEncoding:
    if be.work_qubits == nw:
        return be
    ns = be.system_qubits
    maps = (list(range(ns)), list(range(ns, ns + nw)), list(range(ns + nw, ns + nw + be.lcu_qubits)))
    out = make_encoding(None, be.lam, ns, nw, be.lcu_qubits, be.descriptor,
                        builder=lambda ctl: [be.placed(*maps, tuple(ctl))])
    return _tag(out, **be.meta)


def grad_v_be(n: int, d: int, a: int, spec: fd.PotentialSpec, poly=None) -> BlockEncoding:
    """Pair gradient with the dimension index written to an output register.

    System qubits are the 2d position registers followed by ceil(log d)
    output qubits; on input columns with output register 0 the block is
    sum_k G_k |k> / sqrt(d), G_k the component encoding's block.
    """
    comps = [grad_component_be(n, d, 2, a, spec, poly, 0, 1, k) for k in range(d)]
    if d == 1:
        return comps[0]
    m = nbits(d)
    npos = 2 * d * n
    ns = npos + m
    nw = max(p.work_qubits for p in comps)
    na = max(p.lcu_qubits for p in comps)
    out_reg = list(range(npos, ns))
    gates = [Gate("H", (q,)) for q in out_reg] if d == 2**m else []
    if d != 2**m:
        from .primitives import uniform_gates

        gates = uniform_gates(out_reg, d)
    work = list(range(ns, ns + nw))
    anc = list(range(ns + nw, ns + nw + na))
    for k, comp in enumerate(comps):
        ctl = tuple((q, (k >> b) & 1) for b, q in enumerate(out_reg))
        gates.append(comp.placed(list(range(npos)), work, anc, ctl))
    lam = comps[0].lam * sqrt(d)
    return make_encoding(gates, lam, ns, nw, na, f"grad_V(n={n},d={d},a={a})",
                         meta={"output_register": (npos, m), "component_lambda": comps[0].lam})


def gradient_reference(n, d, a, spec, poly, eta=2, i=0, j=1, k=0) -> np.ndarray:
    """Classical diag of sum_l c_l V(shifted alpha^i, alpha^j)."""
    lam_y = d * (2**n - 1) ** 2

    def value(s2):
        if spec.kind == "quadratic" and poly is None:
            return s2 / lam_y / spec.scale
        return float(fd.potential_of_y(spec, s2 / lam_y))

    return fd.gradient_diag(n, d, a, i, j, k, eta, value)
