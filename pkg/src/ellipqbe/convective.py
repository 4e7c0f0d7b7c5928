"""First-derivative and many-body convective encodings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd_reference as fd
from .block_encoding import BlockEncoding, EncodingError, be_add, be_multiply, lcu
from .circuit import Circuit
from .laplacian import assemble, embed_register
from .potential import fit_potential, grad_component_be, poly_error
from .primitives import shift_gates, work_size


def first_derivative_1d(n: int, a: int) -> BlockEncoding:
    """sum_j c_j S^{-j}: row l reads c_j at column l + j."""
    if 2 * a >= 2**n:
        raise EncodingError("need 2a < 2^n")
    c = fd.first_derivative_coefficients(a)
    w = work_size(n)
    coeffs, units = [], []
    for j, cj in zip(range(-a, a + 1), c):
        if cj == 0:
            continue
        coeffs.append(cj)
        units.append(Circuit(n + w, tuple(shift_gates(range(n), -j, range(n, n + w)))))
    return lcu(coeffs, units, w, f"first_derivative_1d(n={n},a={a})")


def first_derivative_be(n: int, d: int = 1, eta: int = 1, a: int = 1) -> BlockEncoding:
    base = first_derivative_1d(n, a)
    return assemble([base] * (d * eta), n, f"first_derivative(n={n},d={d},eta={eta},a={a})")


def derivative_on(n: int, a: int, slot: int, slots: int) -> BlockEncoding:
    return embed_register(first_derivative_1d(n, a), slot, slots, n)


def convective_term_be(n: int, d: int, a: int, spec: fd.PotentialSpec, poly, i: int, j: int,
                       eta: int = 2) -> BlockEncoding:
    """sum_k diag(d_k^i V_ij) D_k^i for one ordered pair; the derivative acts on particle i."""
    if i == j or not (0 <= i < eta and 0 <= j < eta):
        raise EncodingError("need two distinct particles")
    terms = [_pair_dim_term(n, d, a, spec, poly, i, j, k, eta) for k in range(d)]
    if d == 1:
        return terms[0]
    return be_add(terms, [1.0] * d, f"convective_term(i={i},j={j})")


def _pair_dim_term(n, d, a, spec, poly, i, j, k, eta) -> BlockEncoding:
    g = grad_component_be(n, d, eta, a, spec, poly, i, j, k)
    D = derivative_on(n, a, i * d + k, eta * d)
    return be_multiply(g, D, f"dV*D(i={i},j={j},k={k})")


@dataclass(frozen=True)
class ConvectiveRequest:
    grid: fd.GridSpec
    a: int = 1
    potential: fd.PotentialSpec = fd.PotentialSpec("quadratic")
    degree: int | None = None

    def __post_init__(self):
        if self.grid.eta < 2:
            raise EncodingError("the convective operator needs eta >= 2")
        if 2 * self.a >= self.grid.N:
            raise EncodingError("need 2a < 2^n")
        if self.potential.kind != "quadratic" and self.degree is None:
            raise EncodingError("non-quadratic potentials need a polynomial degree")

    @classmethod
    def from_dict(cls, obj: dict) -> "ConvectiveRequest":
        pot = dict(obj.get("potential", {"kind": "quadratic"}))
        deg = pot.pop("degree", obj.get("degree"))
        spec = fd.PotentialSpec(**pot)
        return cls(fd.GridSpec(int(obj["n"]), int(obj.get("d", 1)), int(obj.get("eta", 2))),
                   int(obj.get("a", 1)), spec, None if deg is None else int(deg))

    def to_dict(self) -> dict:
        p = self.potential
        pot = {"kind": p.kind, "epsilon": p.epsilon, "sigma": p.sigma, "delta": p.delta,
               "r_min": p.r_min, "r_max": p.r_max, "c": p.c}
        if p.v_scale is not None:
            pot["v_scale"] = p.v_scale
        if self.degree is not None:
            pot["degree"] = self.degree
        return {"operator": "convective", "n": self.grid.n, "d": self.grid.d, "eta": self.grid.eta,
                "a": self.a, "potential": pot}

    def polynomial(self):
        if self.potential.kind == "quadratic" and self.degree is None:
            return None
        return fit_potential(self.potential, self.degree)


def pairs(eta: int):
    return [(i, j) for i in range(eta) for j in range(i)]


def convective_be(req: ConvectiveRequest, poly=None) -> BlockEncoding:
    """sum_{i,k} diag(sum_{j<i} d_k^i V_ij) D_k^i.

    The outer PREP weights (i, k) by i and the inner sum is uniform over j < i,
    so the joint amplitudes are uniform over the d*C(eta,2) (pair, dimension)
    triples while each D_k^i is applied once.
    """
    g = req.grid
    poly = req.polynomial() if poly is None else poly
    terms = []
    for i in range(1, g.eta):
        for k in range(g.d):
            grads = [grad_component_be(g.n, g.d, g.eta, req.a, req.potential, poly, i, j, k) for j in range(i)]
            G = grads[0] if i == 1 else be_add(grads, [1.0] * i, f"sum_j dV(i={i},k={k})", select_flag=True)
            terms.append(be_multiply(G, derivative_on(g.n, req.a, i * g.d + k, g.eta * g.d), f"dV*D(i={i},k={k})"))
    if len(terms) == 1:
        return terms[0]
    return be_add(terms, [1.0] * len(terms), f"convective(n={g.n},d={g.d},eta={g.eta},a={req.a})",
                  select_flag=True)


def convective_reference(req: ConvectiveRequest) -> np.ndarray:
    g = req.grid
    lam_y = g.d * (g.N - 1) ** 2
    spec = req.potential

    def value(s2):
        if spec.kind == "quadratic":
            return s2 / lam_y / spec.scale
        return float(fd.potential_of_y(spec, s2 / lam_y))

    return fd.convective_matrix(g, req.a, value).entries


def convective_tolerance(req: ConvectiveRequest, poly) -> float:
    """Entrywise bound: each gradient entry errs by at most beta * sup_error."""
    c = np.abs(fd.first_derivative_coefficients(req.a))
    return float(poly_error(req.potential, poly) * c.sum() * c.max() * (req.grid.eta - 1) + 1e-8)
