"""Laplacian block encodings: periodic, Dirichlet, Neumann, Robin, interior
Dirichlet, d-dimensional assembly and periodic extension."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fd_reference as fd
from .block_encoding import BlockEncoding, EncodingError, be_add, lcu, make_encoding
from .circuit import Circuit
from .primitives import MarkedSet, reflection_gates, shift_gates, work_size


def _unitary(n, *ops) -> Circuit:
    """Product of shift/reflection factors on one n-qubit register, applied right to left.

    ``ops`` are ("S", j) or ("R", indices) in matrix order, e.g. R_A S^j.
    """
    w = work_size(n)
    x, work = list(range(n)), list(range(n, n + w))
    gates = []
    for kind, arg in reversed(ops):
        if kind == "S":
            gates += shift_gates(x, arg, work)
        else:
            gates += reflection_gates(x, arg)
    return Circuit(n + w, tuple(gates))


def _lcu_1d(n, terms, descriptor):
    coeffs = [c for c, _ in terms]
    unitaries = [_unitary(n, *ops) for _, ops in terms]
    return lcu(coeffs, unitaries, work_size(n), descriptor, select_flag=True)


def periodic_1d(n: int, a: int) -> BlockEncoding:
    """sum_j r_j S^j with lambda = sum |r_j|."""
    if 2 * a + 1 > 2**n:
        raise EncodingError("stencil wider than grid")
    r = fd.second_derivative_coefficients(a)
    terms = [(rj, [("S", j)]) for j, rj in zip(range(-a, a + 1), r)]
    return _lcu_1d(n, terms, f"periodic_1d(n={n},a={a})")


def dirichlet_1d(n: int) -> BlockEncoding:
    """-2I + (1/2)(R_{N-1}+I)S^-1 + (1/2)(R_0+I)S^1, lambda = 4."""
    if n < 2:
        raise EncodingError("dirichlet_1d needs n >= 2")
    N = 2**n
    terms = [
        (-2.0, []),
        (0.5, [("S", -1)]),
        (0.5, [("R", [N - 1]), ("S", -1)]),
        (0.5, [("S", 1)]),
        (0.5, [("R", [0]), ("S", 1)]),
    ]
    return _lcu_1d(n, terms, f"dirichlet_1d(n={n})")


def _neumann_like_terms(N, alpha, beta, gamma):
    terms = [(alpha, []), (-0.5, [("R", [0]), ("R", [N - 1])])]
    if beta:
        terms.append((beta, [("R", [N - 1])]))
    if gamma:
        terms.append((gamma, [("R", [0])]))
    terms += [
        (0.5, [("S", -1)]),
        (0.5, [("R", [N - 1]), ("S", -1)]),
        (0.5, [("S", 1)]),
        (0.5, [("R", [0]), ("S", 1)]),
    ]
    return terms


def neumann_1d(n: int) -> BlockEncoding:
    """-3/2 I - (1/2)R_0 R_{N-1} + shifts with the wraparound removed, lambda = 4."""
    if n < 2:
        raise EncodingError("neumann_1d needs n >= 2")
    return _lcu_1d(n, _neumann_like_terms(2**n, -1.5, 0.0, 0.0), f"neumann_1d(n={n})")


def robin_coefficients(n: int, a: float, b: float, c: float, dd: float) -> tuple[float, float, float]:
    """(alpha, beta, gamma) weights of I, R_{N-1}, R_0 in the Robin LCU."""
    h = 1.0 / 2**n
    gamma = a * h / (2 * b)
    beta = -c * h / (2 * dd)
    alpha = -1.5 - gamma - beta
    return alpha, beta, gamma


def robin_1d(n: int, a: float, b: float, c: float, dd: float) -> BlockEncoding:
    if b == 0 or dd == 0:
        raise EncodingError("robin requires b != 0 and dd != 0")
    if n < 2:
        raise EncodingError("robin_1d needs n >= 2")
    alpha, beta, gamma = robin_coefficients(n, a, b, c, dd)
    terms = _neumann_like_terms(2**n, alpha, beta, gamma)
    return _lcu_1d(n, terms, f"robin_1d(n={n},a={a},b={b},c={c},dd={dd})")


def robin_lambda_bound(n: int, a: float, b: float, c: float, dd: float) -> float:
    h = 1.0 / 2**n
    return 4 + h * (abs(a / b) + abs(c / dd))


def interior_dirichlet(n: int, A, a: int = 1, variant: str = "identity") -> BlockEncoding:
    """Dirichlet values prescribed on the contiguous set A of a periodic grid.

    ``identity``: (1/2) sum_j r_j (S^j + S^j R_{A-j}) + (1/2)(I - R_A), the
    stencil with identity rows on A. ``simple``: 2I - (1/2)(S^-1 R_{A+1} +
    S^-1 + S^1 + S^1 R_{A-1}), 3-point only.
    """
    N = 2**n
    A = fd._check_contiguous(N, A)
    ms = MarkedSet(tuple(A), N)
    if variant == "identity":
        if 2 * a + 1 > N:
            raise EncodingError("stencil wider than grid")
        r = fd.second_derivative_coefficients(a)
        terms = []
        for j, rj in zip(range(-a, a + 1), r):
            terms.append((0.5 * rj, [("S", j)]))
            terms.append((0.5 * rj, [("S", j), ("R", ms.shifted(-j).indices)]))
        terms.append((0.5, []))
        terms.append((-0.5, [("R", ms.indices)]))
    elif variant == "simple":
        terms = [
            (2.0, []),
            (-0.5, [("S", -1), ("R", ms.shifted(1).indices)]),
            (-0.5, [("S", -1)]),
            (-0.5, [("S", 1)]),
            (-0.5, [("S", 1), ("R", ms.shifted(-1).indices)]),
        ]
    else:
        raise EncodingError(f"unknown interior Dirichlet variant {variant!r}")
    return _lcu_1d(n, terms, f"interior_dirichlet_{variant}(n={n},A={A})")


def embed_register(be: BlockEncoding, slot: int, slots: int, n: int, work: int | None = None) -> BlockEncoding:
    """Place a one-register encoding on register ``slot`` of ``slots`` n-qubit registers."""
    ns = n * slots
    nw = be.work_qubits if work is None else work
    sysq = list(range(slot * n, slot * n + n))
    maps = (sysq, list(range(ns, ns + nw)), list(range(ns + nw, ns + nw + be.lcu_qubits)))
    return make_encoding(None, be.lam, ns, nw, be.lcu_qubits, be.descriptor + f"@reg{slot}",
                         builder=lambda ctl: [be.placed(*maps, tuple(ctl))])


def one_dim(n: int, a: int, bc: fd.BoundarySpec) -> BlockEncoding:
    k = bc.kind
    p = bc.params
    if k == "periodic":
        return periodic_1d(n, a)
    if a != 1:
        raise EncodingError(f"{k} encodings use the 3-point stencil only")
    if k == "dirichlet":
        return dirichlet_1d(n)
    if k == "neumann":
        return neumann_1d(n)
    if k == "robin":
        return robin_1d(n, p["a"], p["b"], p["c"], p["dd"])
    if k == "interior_dirichlet":
        return interior_dirichlet(n, p["A"], 1, p.get("variant", "identity"))
    raise EncodingError(f"boundary kind {k!r} has no direct encoding")


def assemble(per_register: list[BlockEncoding], n: int, descriptor: str) -> BlockEncoding:
    slots = len(per_register)
    if slots == 1:
        return per_register[0]
    nw = max(b.work_qubits for b in per_register)
    parts = [embed_register(b, s, slots, n, nw) for s, b in enumerate(per_register)]
    return be_add(parts, [1.0] * slots, descriptor, select_flag=True)


def periodic_dd(n: int, d: int, eta: int, a: int) -> BlockEncoding:
    """Kronecker-sum periodic Laplacian on d*eta registers, lambda = d eta lambda_1."""
    base = periodic_1d(n, a)
    return assemble([base] * (d * eta), n, f"periodic_dd(n={n},d={d},eta={eta},a={a})")


@dataclass(frozen=True)
class LaplacianRequest:
    n: int
    d: int = 1
    eta: int = 1
    a: int = 1
    bc: tuple = field(default_factory=lambda: (fd.BoundarySpec("periodic"),))

    def __post_init__(self):
        bcs = tuple(b if isinstance(b, fd.BoundarySpec) else fd.BoundarySpec(b["kind"], b.get("params", {}))
                    for b in self.bc)
        if len(bcs) == 1 and self.d > 1:
            bcs = bcs * self.d
        if len(bcs) != self.d:
            raise EncodingError("need one boundary descriptor per dimension")
        object.__setattr__(self, "bc", bcs)
        fd.GridSpec(self.n, self.d, self.eta)
        if self.a >= 2 and any(not b.kind.startswith("periodic") for b in bcs):
            raise EncodingError("a >= 2 is only allowed with periodic or periodic-extension kinds")

    @classmethod
    def from_dict(cls, obj: dict) -> "LaplacianRequest":
        return cls(int(obj["n"]), int(obj.get("d", 1)), int(obj.get("eta", 1)), int(obj.get("a", 1)),
                   tuple(obj.get("bc", [{"kind": "periodic"}])))

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "eta": self.eta, "a": self.a,
                "bc": [{"kind": b.kind, "params": dict(b.params)} for b in self.bc]}

    @property
    def kinds(self) -> set[str]:
        return {b.kind for b in self.bc}


def bc_dd(req: LaplacianRequest) -> BlockEncoding:
    """Sum of per-dimension encodings on each register; lambda = sum of per-register lambdas."""
    if any(k.startswith("periodic_extension") for k in req.kinds):
        raise EncodingError("use periodic_extension_be for extension kinds")
    per_dim = [one_dim(req.n, req.a, b) for b in req.bc]
    regs = [per_dim[k] for _ in range(req.eta) for k in range(req.d)]
    label = "composite" if len(req.kinds) > 1 else next(iter(req.kinds))
    return assemble(regs, req.n, f"bc_dd[{label}](n={req.n},d={req.d},eta={req.eta})")


def laplacian_oracle(req: LaplacianRequest) -> np.ndarray:
    ops = []
    for b in req.bc:
        ops.append(fd.laplacian_matrix_1d(req.n, req.a, b))
    return fd.assemble_dd(ops, req.d, req.eta).entries


def laplacian_be(req: LaplacianRequest) -> BlockEncoding:
    if req.kinds == {"periodic"} and len(req.bc) == req.d:
        if all(not b.params for b in req.bc):
            return periodic_dd(req.n, req.d, req.eta, req.a)
    return bc_dd(req)


class RhsBuilder:
    """Maps data on [0, 1] to the extended 2N-point right-hand side.

    Dirichlet data are sampled at x_k = k/N, Neumann data at cell centres
    x_k = (k + 1/2)/N.
    """

    def __init__(self, n: int, kind: str):
        self.n, self.kind = n, kind
        self.N = 2**n

    def grid(self) -> np.ndarray:
        k = np.arange(self.N)
        return k / self.N if self.kind == "dirichlet" else (k + 0.5) / self.N

    def __call__(self, f, k: float | None = None) -> np.ndarray:
        samples = f(self.grid()) if callable(f) else np.asarray(f, dtype=float)
        ext = fd.odd_extension(samples) if self.kind == "dirichlet" else fd.even_extension(samples)
        return ext if k is None else fd.mollify(ext, k)

    def restrict(self, u_ext) -> np.ndarray:
        """Values on [0, 1]: indices 0..N for Dirichlet, the upper half for Neumann."""
        u = np.asarray(u_ext)
        return u[: self.N + 1] if self.kind == "dirichlet" else u[self.N :]


def periodic_extension_be(n: int, a: int, kind: str = "dirichlet") -> tuple[BlockEncoding, RhsBuilder]:
    kind = kind.replace("periodic_extension_", "")
    if kind not in ("dirichlet", "neumann"):
        raise EncodingError("periodic extension supports dirichlet or neumann")
    be = periodic_1d(n + 1, a)
    return be, RhsBuilder(n, kind)
