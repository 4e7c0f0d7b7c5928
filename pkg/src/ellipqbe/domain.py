"""Irregular domains: membership oracles, masked block encodings and the
classical projection method."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fd_reference as fd
from .block_encoding import BlockEncoding, EncodingError, lcu, make_encoding
from .circuit import Circuit, Gate, _inverse_gates, opaque_gate
from .laplacian import periodic_dd
from .primitives import prep_gates, shift_gates, work_size

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2


def _neighbour_labels(inside: np.ndarray) -> np.ndarray:
    """Interior/boundary/exterior from a region mask shaped (N,)*d.

    A region point is boundary when one of its axis neighbours is outside
    the region or off the grid.
    """
    lab = np.full(inside.shape, EXTERIOR, dtype=np.int8)
    edge = np.zeros(inside.shape, dtype=bool)
    for ax in range(inside.ndim):
        pad = np.pad(inside, [(1, 1) if a == ax else (0, 0) for a in range(inside.ndim)], constant_values=False)
        sl = [slice(None)] * inside.ndim
        sl[ax] = slice(0, -2)
        lo = pad[tuple(sl)]
        sl[ax] = slice(2, None)
        hi = pad[tuple(sl)]
        edge |= ~lo | ~hi
    lab[inside] = INTERIOR
    lab[inside & edge] = BOUNDARY
    return lab


def _coords(n: int, d: int) -> list[np.ndarray]:
    """Per-dimension coordinates as arrays shaped (N,)*d, axis k = dimension k."""
    N = 2**n
    return list(np.meshgrid(*[np.arange(N)] * d, indexing="ij"))


@dataclass(frozen=True)
class Membership:
    """Label every grid point interior (0), boundary (1) or exterior (2).

    ``region`` maps coordinate arrays to a boolean mask; labels follow from
    the axis-neighbour rule. ``table`` overrides with explicit flat labels.
    Rectangles keep their intervals for the comparator fast path.
    """

    kind: str
    region: Callable | None = None
    table: tuple | None = None
    lo: tuple | None = None
    hi: tuple | None = None
    params: dict = field(default_factory=dict)

    def labels(self, n: int, d: int) -> np.ndarray:
        """Flat labels indexed like the system register (dimension 0 least significant)."""
        N = 2**n
        if self.table is not None:
            lab = np.asarray(self.table, dtype=np.int8)
            if lab.shape != (N**d,):
                raise EncodingError(f"label table must have {N**d} entries")
            if np.any((lab < 0) | (lab > 2)):
                raise EncodingError("labels must be 0, 1 or 2")
            return lab
        inside = np.asarray(self.region(*_coords(n, d)), dtype=bool)
        lab = _neighbour_labels(inside)
        # flat index = sum_k x_k N^k, so dimension 0 must vary fastest
        return lab.transpose(tuple(reversed(range(d)))).reshape(-1)

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"type": "table", "labels": [int(v) for v in self.table]}
        return {"type": self.kind, **self.params}


def rectangle(lo, hi) -> Membership:
    lo, hi = tuple(int(v) for v in lo), tuple(int(v) for v in hi)
    if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
        raise EncodingError("rectangle needs lo <= hi in every dimension")

    def region(*x):
        m = np.ones(x[0].shape, dtype=bool)
        for k, xk in enumerate(x):
            m &= (xk >= lo[k]) & (xk <= hi[k])
        return m

    return Membership("rectangle", region, lo=lo, hi=hi, params={"lo": list(lo), "hi": list(hi)})


def disk(center, radius: float) -> Membership:
    c = tuple(float(v) for v in center)

    def region(*x):
        return sum((xk - ck) ** 2 for xk, ck in zip(x, c)) <= radius**2

    return Membership("disk", region, params={"center": list(c), "radius": float(radius)})


def lshape(lo, hi, cut) -> Membership:
    """The box [lo, hi] with the corner x_0 > cut_0 and x_1 > cut_1 removed."""
    lo, hi, cut = (tuple(int(v) for v in t) for t in (lo, hi, cut))

    def region(*x):
        box = np.ones(x[0].shape, dtype=bool)
        for k, xk in enumerate(x):
            box &= (xk >= lo[k]) & (xk <= hi[k])
        return box & ~((x[0] > cut[0]) & (x[1] > cut[1]))

    return Membership("lshape", region, params={"lo": list(lo), "hi": list(hi), "cut": list(cut)})


def table(labels) -> Membership:
    return Membership("table", table=tuple(int(v) for v in labels))


def membership_from_dict(obj: dict, n: int | None = None, d: int | None = None) -> Membership:
    kind = obj.get("type")
    try:
        if kind == "rectangle":
            return rectangle(obj["lo"], obj["hi"])
        if kind == "disk":
            return disk(obj["center"], obj["radius"])
        if kind == "lshape":
            N = 2**n if n is not None else None
            dim = len(obj.get("lo", [])) or d or 2
            lo = obj.get("lo", [1] * dim)
            hi = obj.get("hi", [N - 2] * dim if N else None)
            cut = obj.get("cut", [(a + b) // 2 for a, b in zip(lo, hi)] if hi else None)
            if hi is None or cut is None:
                raise EncodingError("lshape needs hi and cut (or a grid size)")
            return lshape(lo, hi, cut)
        if kind == "table":
            return table(obj["labels"])
    except KeyError as exc:
        raise EncodingError(f"membership {kind!r} missing field {exc}") from exc
    raise EncodingError(f"unknown membership type {kind!r}")


# ----------------------------------------------------------------------------
# DOM oracle


def _lt_patterns(c: int, n: int):
    """Disjoint control patterns whose union is x < c on an n-bit register."""
    out = []
    for b in reversed(range(n)):
        if (c >> b) & 1:
            out.append([(q, (c >> q) & 1) for q in range(b + 1, n)] + [(b, 0)])
    return out


def _gt_patterns(c: int, n: int):
    out = []
    for b in reversed(range(n)):
        if not (c >> b) & 1:
            out.append([(q, (c >> q) & 1) for q in range(b + 1, n)] + [(b, 1)])
    return out


def _eq_pattern(c: int, n: int):
    return [(q, (c >> q) & 1) for q in range(n)]


def _rectangle_dom_gates(m: Membership, n: int, d: int, flags, scratch) -> list[Gate]:
    """Constant comparisons per dimension, OR-ed into the flags, then uncomputed."""
    out_q, face_q = scratch[:d], scratch[d : 2 * d]
    compute: list[Gate] = []
    for k in range(d):
        reg = list(range(k * n, k * n + n))
        to = lambda pats: [(reg[q], v) for q, v in pats]  # noqa: E731
        lo, hi = m.lo[k], m.hi[k]
        for pat in _lt_patterns(lo, n) + _gt_patterns(hi, n):
            compute.append(Gate("X", (out_q[k],), tuple(to(pat))))
        faces = [lo] if lo == hi else [lo, hi]
        for c in faces:
            compute.append(Gate("X", (face_q[k],), tuple(to(_eq_pattern(c, n)))))
    ext, bnd = flags[1], flags[0]
    gates = list(compute)
    # ext = OR_k out_k
    gates.append(Gate("X", (ext,)))
    gates.append(Gate("X", (ext,), tuple((q, 0) for q in out_q)))
    # bnd = not ext and OR_k face_k
    gates.append(Gate("X", (bnd,), ((ext, 0),)))
    gates.append(Gate("X", (bnd,), ((ext, 0),) + tuple((q, 0) for q in face_q)))
    return gates + list(reversed(compute))


def dom_scratch(membership: Membership, d: int) -> int:
    return 2 * d if membership.kind == "rectangle" else 0


def dom_gates(membership: Membership, n: int, d: int, flags, scratch=()) -> list[Gate]:
    """|x>|00> -> |x>|label(x)>; flags[0] is the label's low bit (boundary)."""
    if membership.kind == "rectangle" and len(scratch) >= 2 * d:
        return _rectangle_dom_gates(membership, n, d, flags, scratch)
    lab = membership.labels(n, d)
    ns = n * d
    size = 2 ** (ns + 2)
    perm = np.arange(size)
    x = np.arange(2**ns)
    # swap |x,00> with |x,label>; other flag values are unreachable and fixed
    moved = lab != INTERIOR
    perm[x[moved]] = x[moved] | (lab[moved].astype(np.int64) << ns)
    perm[x[moved] | (lab[moved].astype(np.int64) << ns)] = x[moved]
    return [opaque_gate(list(range(ns)) + list(flags), perm)]


def dom_circuit(membership: Membership, n: int, d: int) -> Circuit:
    """System plus 2 flag qubits, plus 2d clean scratch qubits for rectangles."""
    ns = n * d
    sc = dom_scratch(membership, d)
    flags = [ns, ns + 1]
    scratch = list(range(ns + 2, ns + 2 + sc))
    regs = {"sys": (0, ns), "flags": (ns, 2)}
    if sc:
        regs["scratch"] = (ns + 2, sc)
    return Circuit(ns + 2 + sc, tuple(dom_gates(membership, n, d, flags, scratch)), regs)


# ----------------------------------------------------------------------------
# Boundary operator and masking


def boundary_operator_be(n: int, d: int = 1, a: float = 1.0, b: float = 0.0) -> BlockEncoding:
    """B = b sum_k sum_j c_j S_k^{-j} + a I with 3-point first-derivative weights c_j.

    The default (a=1, b=0) is the homogeneous Dirichlet row operator I.
    """
    ns = n * d
    if b == 0:
        if a == 0:
            raise EncodingError("boundary operator is zero")
        gates = [Gate("GPHASE", (), (), (np.pi,))] if a < 0 else []
        return make_encoding(gates, abs(a), ns, 0, 0, f"boundary_op(a={a},b=0)")
    w = work_size(n)
    c = fd.first_derivative_coefficients(1)
    coeffs, units = [a], [Circuit(ns + w, ())]
    for k in range(d):
        reg = list(range(k * n, k * n + n))
        for j, cj in zip((-1, 0, 1), c):
            if cj:
                coeffs.append(b * cj)
                units.append(Circuit(ns + w, tuple(shift_gates(reg, -j, range(ns, ns + w)))))
    return lcu(coeffs, units, w, f"boundary_op(a={a},b={b},d={d})")


def boundary_operator_matrix(n: int, d: int = 1, a: float = 1.0, b: float = 0.0) -> np.ndarray:
    N = 2**n
    D = fd.first_derivative_matrix_1d(n, 1)
    out = a * np.eye(N**d)
    for k in range(d):
        out = out + b * fd.kron_slot(D, k, d, N)
    return out


def masked_be(U_L: BlockEncoding, U_B: BlockEncoding, membership: Membership, n: int, d: int,
              descriptor: str = "") -> BlockEncoding:
    """lam_out * block = Pi_int L + Pi_bnd B, with lam_out = lam_L + lam_B.

    A weighted PREP on one qubit picks L or B. Each branch is followed by the
    DOM oracle and a kicked-back phase under a Hadamard-sandwiched qubit:
    Z (x) Z keeps interior rows, -Z on the boundary bit keeps boundary rows.
    The projector acts on output rows, so DOM is applied after the operator
    and uncomputed before the final Hadamard.
    """
    ns = n * d
    if U_L.system_qubits != ns or U_B.system_qubits != ns:
        raise EncodingError("U_L and U_B must act on the n*d system qubits")
    sc = dom_scratch(membership, d)
    nw = max(U_L.work_qubits, U_B.work_qubits, sc)
    na = max(U_L.lcu_qubits, U_B.lcu_qubits)
    sysq, work = list(range(ns)), list(range(ns, ns + nw))
    base = ns + nw
    flags = [base, base + 1]
    inner = list(range(base + 2, base + 2 + na))
    kick, pick = base + 2 + na, base + 3 + na
    dom = dom_gates(membership, n, d, flags, work[:sc])
    undom = _inverse_gates(dom, {})
    lam = U_L.lam + U_B.lam
    prep = prep_gates([pick], [U_L.lam, U_B.lam])
    unprep = _inverse_gates(prep, {})

    def build(ctl):
        ctl = tuple(ctl)
        gates = list(prep) + [Gate("H", (kick,))]
        gates.append(U_L.placed(sysq, work, inner, ctl + ((pick, 0),)))
        gates.append(U_B.placed(sysq, work, inner, ctl + ((pick, 1),)))
        gates += dom
        gates.append(Gate("Z", (flags[0],), ((kick, 1), (pick, 0))))
        gates.append(Gate("Z", (flags[1],), ((kick, 1), (pick, 0))))
        gates.append(Gate("X", (flags[0],)))
        gates.append(Gate("Z", (flags[0],), ((kick, 1), (pick, 1))))
        gates.append(Gate("X", (flags[0],)))
        gates += undom
        return gates + [Gate("H", (kick,))] + unprep

    regs = {"sys": (0, ns), "flags": (base, 2), "kick": (kick, 1), "pick": (pick, 1)}
    if nw:
        regs["work"] = (ns, nw)
    if na:
        regs["inner"] = (base + 2, na)
    return make_encoding(None, lam, ns, nw, 4 + na, descriptor or f"masked[{membership.kind}]", regs,
                         {"membership": membership.kind}, build)


def masked_laplacian_be(membership: Membership, n: int, d: int, a: int = 1,
                        boundary: tuple[float, float] = (1.0, 0.0)) -> BlockEncoding:
    """Periodic Laplacian on the interior, the boundary row operator on the boundary."""
    U_L = periodic_dd(n, d, 1, a)
    U_B = boundary_operator_be(n, d, *boundary)
    return masked_be(U_L, U_B, membership, n, d)


# ----------------------------------------------------------------------------
# Classical references


def projectors(membership: Membership, n: int, d: int) -> dict[str, np.ndarray]:
    lab = membership.labels(n, d)
    return {name: np.diag((lab == v).astype(float)) for name, v in
            (("interior", INTERIOR), ("boundary", BOUNDARY), ("exterior", EXTERIOR))}


def projected_operator(membership: Membership, n: int, d: int, L=None, B=None) -> np.ndarray:
    """Pi_int L + Pi_bnd B, zero on exterior rows."""
    N = 2**n
    if L is None:
        L = fd.assemble_dd([fd.laplacian_matrix_1d(n, 1, "periodic")], d).entries
    if B is None:
        B = np.eye(N**d)
    P = projectors(membership, n, d)
    return P["interior"] @ np.asarray(L) + P["boundary"] @ np.asarray(B)


def projection_reference(membership: Membership, n: int, d: int, rhs) -> tuple[fd.DenseOperator, np.ndarray]:
    """Solve -Lap u = f on the interior with u = 0 on boundary and exterior.

    The system is Pi_int (-Lap_h) + Pi_bnd + Pi_ext with the periodic Laplacian;
    ``rhs`` is a flat array or a callable f(x_0, ..., x_{d-1}) on [0, 1)^d.
    """
    N = 2**n
    lap = -fd.assemble_dd([fd.laplacian_matrix_1d(n, 1, "periodic")], d).entries * N**2
    P = projectors(membership, n, d)
    A = P["interior"] @ lap + P["boundary"] + P["exterior"]
    if callable(rhs):
        x = np.arange(N**d)
        pts = [((x // N**k) % N) / N for k in range(d)]
        f = np.asarray(rhs(*pts), dtype=float)
    else:
        f = np.asarray(rhs, dtype=float)
    f = np.diag(P["interior"]) * f
    op = fd.DenseOperator(A, "projection method, interior rows scaled by 1/h^2")
    return op, fd.solve_bvp(op, f)


__all__ = [
    "BOUNDARY",
    "EXTERIOR",
    "INTERIOR",
    "Membership",
    "boundary_operator_be",
    "boundary_operator_matrix",
    "disk",
    "dom_circuit",
    "dom_gates",
    "lshape",
    "masked_be",
    "masked_laplacian_be",
    "membership_from_dict",
    "projected_operator",
    "projection_reference",
    "projectors",
    "rectangle",
    "table",
]
