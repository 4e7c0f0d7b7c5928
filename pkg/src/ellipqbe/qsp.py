"""Chebyshev fitting, QSP phase factors and the singular value transform circuit."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import least_squares

from .block_encoding import BlockEncoding, EncodingError, _inv, make_encoding
from .circuit import Gate, call

MARGIN = 1e-4
SAMPLE_POINTS = 4096


class QspError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _parity(coef, tol=1e-12) -> str | None:
    c = np.asarray(coef, dtype=float)
    big = max(np.max(np.abs(c)), 1e-300)
    odd = np.max(np.abs(c[1::2])) if len(c) > 1 else 0.0
    even = np.max(np.abs(c[0::2]))
    if odd <= tol * big:
        return "even"
    if even <= tol * big:
        return "odd"
    return None


@dataclass(frozen=True)
class PolynomialApprox:
    """Realized polynomial P with |P| <= 1 on [-1, 1]; the target is ``scale * P``.

    ``coefficients`` are Chebyshev coefficients in the variable mapped from
    ``interval`` to [-1, 1]; for encodings the interval is [-1, 1] itself.
    """

    coefficients: tuple[float, ...]
    interval: tuple[float, float]
    sup_error: float
    parity: str | None
    scale: float = 1.0
    window: tuple[float, float] | None = None

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def realized(self, x) -> np.ndarray:
        lo, hi = self.interval
        t = (2 * np.asarray(x, dtype=float) - lo - hi) / (hi - lo)
        return C.chebval(t, self.coefficients)

    def __call__(self, x) -> np.ndarray:
        return self.scale * self.realized(x)

    def x_coefficients(self) -> np.ndarray:
        """Coefficients in x over [-1, 1] (exact only when the interval is [-1, 1])."""
        if tuple(self.interval) == (-1.0, 1.0):
            return np.asarray(self.coefficients)
        p = C.Chebyshev(self.coefficients, domain=list(self.interval)).convert(domain=[-1, 1])
        return p.coef

    def part(self, which: str) -> "PolynomialApprox":
        c = np.array(self.x_coefficients(), dtype=float)
        c[(1 if which == "even" else 0)::2] = 0.0
        return PolynomialApprox(tuple(c), (-1.0, 1.0), self.sup_error, which, self.scale, self.window)


def _grid(lo, hi, m=SAMPLE_POINTS):
    return np.linspace(lo, hi, m)


def chebyshev_fit(f, degree: int, window=(-1.0, 1.0), mode: str = "extend", parity: str | None = None,
                  outside_weight: float = 1e-2) -> PolynomialApprox:
    """Polynomial approximation of ``f`` certified on ``window``.

    ``interpolate``: Chebyshev interpolation on the window itself (mapped
    variable); no bound is imposed outside the window. ``extend``: weighted
    least squares on [-1, 1], window points at weight one and the rest at
    ``outside_weight``, optionally restricted to one parity, then a uniform
    rescale so |P| <= 1 - 1e-4 on [-1, 1]; the rescale goes into ``scale``.
    """
    if degree < 0:
        raise EncodingError("degree must be >= 0")
    lo, hi = float(window[0]), float(window[1])
    if not (-1 <= lo < hi <= 1):
        raise EncodingError("window must lie inside [-1, 1]")
    wx = _grid(lo, hi)
    fw = np.asarray(f(wx), dtype=float) * np.ones_like(wx)
    if not np.all(np.isfinite(fw)):
        raise EncodingError("target is not finite on the window")
    if mode == "interpolate":
        coef = C.chebinterpolate(lambda t: np.asarray(f((t * (hi - lo) + lo + hi) / 2), float) * np.ones_like(t),
                                 degree)
        approx = PolynomialApprox(tuple(coef), (lo, hi), 0.0, _parity(coef), 1.0, (lo, hi))
        err = float(np.max(np.abs(approx(wx) - fw)))
        return PolynomialApprox(approx.coefficients, (lo, hi), err, approx.parity, 1.0, (lo, hi))
    if mode != "extend":
        raise EncodingError(f"unknown fit mode {mode!r}")
    xs = np.cos(np.pi * (np.arange(4 * degree + 64) + 0.5) / (4 * degree + 64))
    xs = np.concatenate([xs, wx])
    if parity == "even":
        xs = np.concatenate([xs, -wx])
    elif parity == "odd":
        xs = np.concatenate([xs, -wx])
    fx = np.asarray(f(xs), dtype=float) * np.ones_like(xs)
    if not np.all(np.isfinite(fx)):
        raise EncodingError("target is not finite on [-1, 1]")
    inwin = (np.abs(xs) >= lo) & (np.abs(xs) <= hi) if parity else (xs >= lo) & (xs <= hi)
    w = np.where(inwin, 1.0, outside_weight)
    V = C.chebvander(xs, degree)
    cols = np.arange(degree + 1)
    if parity == "even":
        cols = cols[cols % 2 == 0]
    elif parity == "odd":
        cols = cols[cols % 2 == 1]
    sol = np.linalg.lstsq(V[:, cols] * w[:, None], fx * w, rcond=None)[0]
    coef = np.zeros(degree + 1)
    coef[cols] = sol
    dense = C.chebval(_grid(-1, 1, 8 * SAMPLE_POINTS + 1), coef)
    peak = float(np.max(np.abs(dense)))
    scale = max(1.0, peak / (1 - MARGIN))
    coef = coef / scale
    dx = _grid(lo, hi, 16 * SAMPLE_POINTS + 1)
    fd_ = np.asarray(f(dx), dtype=float) * np.ones_like(dx)
    err = max(float(np.max(np.abs(scale * C.chebval(wx, coef) - fw))),
              float(np.max(np.abs(scale * C.chebval(dx, coef) - fd_))))
    return PolynomialApprox(tuple(coef), (-1.0, 1.0), err, parity or _parity(coef), scale, (lo, hi))


def degree_for_inverse_power(c: float, delta: float, eps: float, K: float = 2.0) -> int:
    """ceil(K max(1, c) / delta ln(1/eps)), K = 2."""
    if not (0 < delta <= 0.5 and 0 < eps <= 0.5):
        raise EncodingError("delta and eps must lie in (0, 1/2]")
    return int(ceil(K * max(1.0, c) / delta * log(1 / eps) - 1e-9))


# ----------------------------------------------------------------------------
# Phase factors (W_x convention: U = e^{i phi_0 Z} prod_j W(x) e^{i phi_j Z})


@dataclass(frozen=True)
class QspPhases:
    phases: tuple[float, ...]
    parity: str
    target: PolynomialApprox | None = None
    residual: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.phases) - 1


def _sweep(phases, x):
    """Top-left entries of the ansatz and their phase derivatives at nodes ``x``."""
    phases = np.asarray(phases, dtype=float)
    d = len(phases) - 1
    K = len(x)
    s = np.sqrt(np.maximum(0.0, 1 - x**2))
    W = np.empty((K, 2, 2), dtype=complex)
    W[:, 0, 0] = W[:, 1, 1] = x
    W[:, 0, 1] = W[:, 1, 0] = 1j * s
    e = np.exp(1j * phases)
    # suffix[j] = M_j W M_{j+1} ... W M_d e0, as (K, 2) vectors.
    suffix = np.empty((d + 1, K, 2), dtype=complex)
    v = np.zeros((K, 2), dtype=complex)
    v[:, 0] = e[d]
    suffix[d] = v
    for j in range(d - 1, -1, -1):
        v = np.einsum("kab,kb->ka", W, v)
        v = v * np.array([e[j], np.conj(e[j])])
        suffix[j] = v
    tl = suffix[0][:, 0]
    # prefix[j] = e0^T M_0 W ... M_{j-1} W, as row vectors.
    grad = np.empty((d + 1, K), dtype=complex)
    row = np.zeros((K, 2), dtype=complex)
    row[:, 0] = 1.0
    for j in range(d + 1):
        z = suffix[j] * np.array([1j, -1j])
        grad[j] = np.einsum("ka,ka->k", row, z)
        if j < d:
            row = row * np.array([e[j], np.conj(e[j])])
            row = np.einsum("ka,kab->kb", row, W)
    return tl, grad


def qsp_response(phases, x) -> np.ndarray:
    """Re <0|U(x)|0>, the polynomial realized by ``phases``."""
    return np.real(_sweep(phases, np.atleast_1d(np.asarray(x, dtype=float)))[0])


def _nodes(d):
    m = (d + 2) // 2
    k = np.arange(1, m + 1)
    return np.cos((2 * k - 1) * np.pi / (4 * m))


def qsp_phases(poly: PolynomialApprox, tol: float = 1e-8, maxiter: int = 500) -> QspPhases:
    """Symmetric phases with Re<0|U|0> = P at Chebyshev nodes (Levenberg-Marquardt)."""
    c = np.asarray(poly.x_coefficients(), dtype=float)
    nz = np.nonzero(np.abs(c) > 1e-14)[0]
    d = int(nz[-1]) if len(nz) else 0
    c = c[: d + 1]
    par = poly.parity or _parity(c)
    if par is None:
        raise QspError("polynomial has indefinite parity; split it first")
    if d % 2 != (0 if par == "even" else 1):
        d += 1
        c = np.append(c, 0.0)
    if d == 0:
        v = float(c[0])
        if abs(v) > 1:
            raise QspError("constant exceeds 1")
        return QspPhases((float(np.arccos(v)),), "even", poly, 0.0)
    x = _nodes(d)
    f = C.chebval(x, c)
    half = (d + 2) // 2

    def full(t):
        return np.concatenate([t, t[: d + 1 - half][::-1]])

    def fold(g):
        out = g[:half].copy()
        out[: d + 1 - half] += g[half:][::-1]
        return out

    def resid(t):
        return np.real(_sweep(full(t), x)[0]) - f

    def jac(t):
        return fold(np.real(_sweep(full(t), x)[1])).T

    best, best_r = None, np.inf
    # Zero start first, then the standard pi/4 start whose response is identically zero.
    for init in (np.zeros(half), np.r_[np.pi / 4, np.zeros(half - 1)]):
        res = least_squares(resid, init, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=maxiter)
        r = float(np.max(np.abs(resid(res.x))))
        if r < best_r:
            best, best_r = res.x, r
        if best_r < tol:
            break
    phi = full(best)
    err = float(np.max(np.abs(qsp_response(phi, x) - f)))
    if err >= tol:
        raise QspError(f"phase solver did not converge (residual {err:.3e})", err)
    return QspPhases(tuple(float(p) for p in phi), par, poly, err)


# ----------------------------------------------------------------------------
# Circuit


def _projector_phase(c, anc, theta, ctl):
    """exp(i theta (2 Pi - I)) on the branch c=0 and its conjugate on c=1."""
    pi_ctl = tuple((q, 0) for q in anc)
    flip = Gate("X", (c,), ctl + pi_ctl)
    return [flip, Gate("RZ", (c,), ctl, (2 * theta,)), flip]


def qsvt_gates(be: BlockEncoding, phases: QspPhases, c: int, ctl=()) -> list[Gate]:
    """Real-part singular value transform of ``be``'s block on signal qubit ``c``.

    Converts the W_x phases to the reflection convention (ends shifted by
    -pi/4, interior by -pi/2) and restores the i^d prefactor with RZ(-d pi).
    """
    phi = list(phases.phases)
    d = len(phi) - 1
    ctl = tuple(ctl)
    if d == 0:
        return [Gate("H", (c,), ctl), Gate("RZ", (c,), ctl, (-2 * phi[0],)), Gate("H", (c,), ctl)]
    psi = [phi[0] - np.pi / 4] + [p - np.pi / 2 for p in phi[1:-1]] + [phi[-1] - np.pi / 4]
    n = be.circuit.num_qubits
    anc = list(range(be.system_qubits + be.work_qubits, n))
    # Even degree: the unselected branch sees U^dag U pairs only, so U needs no control.
    fwd = tuple(be.controlled_gates(() if d % 2 == 0 else ctl))
    u = call(fwd)
    udag = call(tuple(_inv(list(fwd))))
    gates = [Gate("H", (c,), ctl)]
    gates += _projector_phase(c, anc, psi[d], ctl)
    for k in range(1, d + 1):
        gates.append(u if k % 2 else udag)
        gates += _projector_phase(c, anc, psi[d - k], ctl)
    gates += [Gate("RZ", (c,), ctl, (-d * np.pi,)), Gate("H", (c,), ctl)]
    return gates


def _check_hermitian(be: BlockEncoding):
    if be.meta.get("hermitian"):
        return
    if be.system_qubits <= 8:
        from .block_encoding import extract_block

        B = extract_block(be)
        if np.max(np.abs(B - B.conj().T)) < 1e-10:
            return
    raise EncodingError("qsp_apply requires a Hermitian block")


def qsp_apply(be: BlockEncoding, phases: QspPhases | PolynomialApprox, descriptor: str = "") -> BlockEncoding:
    """Encoding of P(block) with lambda = poly scale (doubled for an indefinite-parity split)."""
    _check_hermitian(be)
    if be.lcu_qubits == 0:
        raise EncodingError("qsp_apply needs an encoding with ancillas")
    poly = phases if isinstance(phases, PolynomialApprox) else phases.target
    scale = poly.scale if poly is not None else 1.0
    ns, nw, na = be.system_qubits, be.work_qubits, be.lcu_qubits
    c = ns + nw + na
    meta = {"hermitian": True, "diagonal": be.meta.get("diagonal", False), "qsp_degree": 0}
    if isinstance(phases, PolynomialApprox) and phases.parity is None and _parity(phases.x_coefficients()) is None:
        ev, od = qsp_phases(phases.part("even")), qsp_phases(phases.part("odd"))
        sel = c + 1

        def build_split(ctl):
            ctl = tuple(ctl)
            return ([Gate("H", (sel,), ctl)] + qsvt_gates(be, ev, c, ctl + ((sel, 0),))
                    + qsvt_gates(be, od, c, ctl + ((sel, 1),)) + [Gate("H", (sel,), ctl)])

        meta["qsp_degree"] = max(ev.degree, od.degree)
        return make_encoding(None, 2 * scale, ns, nw, na + 2, descriptor or "qsp_split", meta=meta,
                             builder=build_split)
    ph = phases if isinstance(phases, QspPhases) else qsp_phases(phases)
    meta["qsp_degree"] = ph.degree
    return make_encoding(None, scale, ns, nw, na + 1, descriptor or f"qsp(deg={ph.degree})", meta=meta,
                         builder=lambda ctl: qsvt_gates(be, ph, c, tuple(ctl)))
