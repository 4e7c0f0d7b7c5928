"""Classical finite-difference operators used as ground truth for encodings.

All Laplacians use the negative-definite convention (centre weight -2 for
the 3-point stencil) and omit the 1/h^2 factor.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

import numpy as np
from scipy import linalg as sla

DENSE_LIMIT = 4096


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class StencilSpec:
    a: int
    derivative_order: int = 2

    def __post_init__(self):
        if self.a < 1:
            raise OperatorError("stencil half-width a must be >= 1")
        if self.derivative_order not in (1, 2):
            raise OperatorError("derivative_order must be 1 or 2")

    @property
    def points(self) -> int:
        return 2 * self.a + 1


@dataclass(frozen=True)
class GridSpec:
    n: int
    d: int = 1
    eta: int = 1

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.eta < 1:
            raise OperatorError("n, d and eta must be >= 1")

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def dim(self) -> int:
        return self.N ** (self.eta * self.d)


BC_KINDS = (
    "periodic",
    "dirichlet",
    "neumann",
    "robin",
    "interior_dirichlet",
    "periodic_extension_dirichlet",
    "periodic_extension_neumann",
)


@dataclass(frozen=True)
class BoundarySpec:
    """One-dimensional boundary descriptor.

    ``params`` holds ``a, b, c, dd`` for Robin (``a u + b u' = 0`` at the left
    end, ``c u + dd u' = 0`` at the right end) and ``A`` for interior Dirichlet.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise OperatorError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "robin":
            for key in ("a", "b", "c", "dd"):
                if key not in self.params:
                    raise OperatorError(f"robin requires parameter {key!r}")
            if self.params["b"] == 0 or self.params["dd"] == 0:
                raise OperatorError("robin requires b != 0 and dd != 0")
        if self.kind == "interior_dirichlet" and not self.params.get("A"):
            raise OperatorError("interior_dirichlet requires a nonempty set A")


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray
    scale_note: str = "1/h^2 factored out"

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise OperatorError("operator must be square")


# ----------------------------------------------------------------------------
# Stencils


def fornberg_weights(x0, nodes, m: int) -> list[list[Fraction]]:
    """Fornberg's recursion in exact arithmetic.

    Returns ``w[k][j]``: weight of node j in the k-th derivative at x0.
    """
    x0 = Fraction(x0)
    nodes = [Fraction(x) for x in nodes]
    n = len(nodes)
    w = [[Fraction(0)] * n for _ in range(m + 1)]
    w[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = Fraction(1)
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k][i] = c1 * (k * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2
            for k in range(mn, 0, -1):
                w[k][j] = (c4 * w[k][j] - k * w[k - 1][j]) / c3
            w[0][j] = c4 * w[0][j] / c3
        c1 = c2
    return w


def _central(a: int, order: int) -> list[Fraction]:
    if a < 1:
        raise OperatorError("stencil half-width a must be >= 1")
    return fornberg_weights(0, range(-a, a + 1), order)[order]


def second_derivative_coefficients(spec: StencilSpec | int) -> list[float]:
    """Weights r_{-a..a} of the (2a+1)-point central second-derivative stencil."""
    a = spec.a if isinstance(spec, StencilSpec) else int(spec)
    return [float(x) for x in _central(a, 2)]


def first_derivative_coefficients(spec: StencilSpec | int) -> list[float]:
    """Weights c_{-a..a} of the central first-derivative stencil (c_0 = 0)."""
    a = spec.a if isinstance(spec, StencilSpec) else int(spec)
    return [float(x) for x in _central(a, 1)]


def second_derivative_closed_form(a: int) -> list[float]:
    """Closed form r_j = 2(-1)^(j+1) (a!)^2 / (j^2 (a-j)! (a+j)!)."""
    r = {}
    for j in range(1, a + 1):
        v = Fraction(2 * (-1) ** (j + 1) * factorial(a) ** 2, j * j * factorial(a - j) * factorial(a + j))
        r[j] = r[-j] = v
    r[0] = -2 * sum(r[j] for j in range(1, a + 1))
    return [float(r[j]) for j in range(-a, a + 1)]


def first_derivative_closed_form(a: int) -> list[float]:
    """Closed form c_j = (-1)^(j+1) (a!)^2 / (j (a-j)! (a+j)!)."""
    c = {0: Fraction(0)}
    for j in range(1, a + 1):
        v = Fraction((-1) ** (j + 1) * factorial(a) ** 2, j * factorial(a - j) * factorial(a + j))
        c[j] = v
        c[-j] = -v
    return [float(c[j]) for j in range(-a, a + 1)]


def stencil_l1(a: int) -> float:
    """Sum of |r_j|; the periodic encoding's subnormalization."""
    return float(sum(abs(x) for x in _central(a, 2)))


# ----------------------------------------------------------------------------
# One-dimensional operators


def circulant_stencil(N: int, coeffs) -> np.ndarray:
    a = (len(coeffs) - 1) // 2
    if len(coeffs) > N:
        raise OperatorError("stencil wider than grid")
    M = np.zeros((N, N))
    for j, c in zip(range(-a, a + 1), coeffs):
        for i in range(N):
            M[i, (i + j) % N] += c
    return M


def _tridiag(N: int) -> np.ndarray:
    return -2 * np.eye(N) + np.eye(N, k=1) + np.eye(N, k=-1)


def interior_dirichlet_matrix(N: int, A, a: int = 1, variant: str = "identity") -> np.ndarray:
    """Interior Dirichlet operator on a periodic grid with marked set A.

    ``identity``: the periodic stencil with the rows in A replaced by
    identity rows. ``simple``: 2I - (S + S^-1) with the off-diagonal part of
    the rows in A removed (3-point only, positive diagonal convention).
    """
    A = sorted(set(int(x) % N for x in A))
    if variant == "identity":
        L = circulant_stencil(N, second_derivative_coefficients(a))
        L[A, :] = 0.0
        L[A, A] = 1.0
        return L
    if variant == "simple":
        L = -circulant_stencil(N, [1.0, -2.0, 1.0])
        for i in A:
            L[i, :] = 0.0
            L[i, i] = 2.0
        return L
    raise OperatorError(f"unknown interior Dirichlet variant {variant!r}")


def _check_contiguous(N: int, A) -> list[int]:
    A = sorted(set(int(x) % N for x in A))
    if len(A) == N:
        return A
    start = [x for x in A if (x - 1) % N not in A]
    if len(start) != 1:
        raise OperatorError("interior Dirichlet set must be contiguous modulo N")
    return A


def laplacian_matrix_1d(n: int, spec: StencilSpec | int, bc: BoundarySpec | str) -> DenseOperator:
    spec = spec if isinstance(spec, StencilSpec) else StencilSpec(int(spec))
    bc = bc if isinstance(bc, BoundarySpec) else BoundarySpec(bc)
    N = 2**n
    h = 1.0 / N
    k = bc.kind
    r = second_derivative_coefficients(spec)
    if k in ("periodic",):
        return DenseOperator(circulant_stencil(N, r))
    if k.startswith("periodic_extension"):
        return DenseOperator(circulant_stencil(2 * N, r), "1/h^2 factored out; extended grid of 2N points")
    if spec.a != 1:
        raise OperatorError(f"{k} boundaries are supported with the 3-point stencil only")
    if k == "dirichlet":
        return DenseOperator(_tridiag(N))
    if k == "neumann":
        L = _tridiag(N)
        L[0, 0] = L[-1, -1] = -1.0
        return DenseOperator(L, "1/h^2 factored out; negated positive Neumann form")
    if k == "robin":
        p = bc.params
        L = _tridiag(N)
        L[0, 0] = -1.0 - p["a"] * h / p["b"]
        L[-1, -1] = -1.0 + p["c"] * h / p["dd"]
        return DenseOperator(L, "1/h^2 factored out; negated positive Robin form")
    if k == "interior_dirichlet":
        A = _check_contiguous(N, bc.params["A"])
        variant = bc.params.get("variant", "identity")
        return DenseOperator(interior_dirichlet_matrix(N, A, 1, variant), f"interior Dirichlet ({variant})")
    raise OperatorError(k)


def first_derivative_matrix_1d(n: int, a: int) -> np.ndarray:
    return circulant_stencil(2**n, first_derivative_coefficients(a))


def kron_slot(op: np.ndarray, slot: int, slots: int, N: int) -> np.ndarray:
    """Embed ``op`` on register ``slot`` of ``slots`` registers (slot 0 least significant)."""
    out = np.eye(1)
    for s in reversed(range(slots)):
        out = np.kron(out, op if s == slot else np.eye(N))
    return out


def assemble_dd(per_dim_ops, d: int, eta: int = 1, limit: int = DENSE_LIMIT) -> DenseOperator:
    """Kronecker sum over d*eta registers; register index = particle*d + dim."""
    ops = [o.entries if isinstance(o, DenseOperator) else np.asarray(o) for o in per_dim_ops]
    if len(ops) == 1:
        ops = ops * d
    if len(ops) == d:
        ops = ops * eta
    if len(ops) != d * eta:
        raise OperatorError("need one operator per dimension (or per register)")
    dims = [o.shape[0] for o in ops]
    total = int(np.prod(dims))
    if total > limit:
        raise OperatorError(f"dense dimension {total} exceeds limit {limit}")
    if len(ops) == 1:
        return DenseOperator(ops[0])
    out = np.zeros((total, total))
    for s, o in enumerate(ops):
        term = np.eye(1)
        for t in reversed(range(len(ops))):
            term = np.kron(term, o if t == s else np.eye(dims[t]))
        out += term
    return DenseOperator(out)


# ----------------------------------------------------------------------------
# Periodic extension and mollification


def odd_extension(samples) -> np.ndarray:
    """Antisymmetric 2N-point extension of vertex samples f(k/N), k < N.

    Output is [0, f_1, ..., f_{N-1}, 0, -f_{N-1}, ..., -f_1]: both reflection
    points x=0 and x=1 carry the value 0.
    """
    f = np.asarray(samples, dtype=float)
    if len(f) < 2:
        raise OperatorError("need at least two samples")
    g = np.concatenate([f, [0.0], -f[:0:-1]])
    g[0] = 0.0
    return g


def even_extension(samples) -> np.ndarray:
    """Mirror extension [f_{N-1},...,f_0,f_0,...,f_{N-1}] of cell-centred samples."""
    f = np.asarray(samples, dtype=float)
    if len(f) < 2:
        raise OperatorError("need at least two samples")
    return np.concatenate([f[::-1], f])


def bump(x, k: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = (k * x) ** 2
    out = np.zeros_like(x)
    m = y < 1
    out[m] = np.exp(1.0 / (y[m] - 1.0))
    return out


def _simpson_weights(m: int, h: float) -> np.ndarray:
    """Composite Simpson weights for m+1 equispaced nodes (m even)."""
    w = np.ones(m + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def bump_normalizer(k: float) -> float:
    """Integral of the unnormalized bump over its support |x| < 1/k."""
    from scipy.integrate import quad

    return quad(lambda x: float(bump(np.array([x]), k)[0]), -1 / k, 1 / k, epsabs=1e-14, epsrel=1e-13)[0]


def bump_mass(k: float, points: int = 4096) -> float:
    """Simpson quadrature of the normalized bump."""
    m = points if points % 2 == 0 else points + 1
    x = np.linspace(-1 / k, 1 / k, m + 1)
    return float(_simpson_weights(m, x[1] - x[0]) @ bump(x, k)) / bump_normalizer(k)


def mollify(samples, k: float) -> np.ndarray:
    """Circular convolution of periodic samples on [0, 1) with the unit-mass bump.

    The kernel e^{1/((kx)^2-1)} is supported on |x| < 1/k. Samples are
    refined onto 4M points by periodic linear interpolation and the
    convolution is evaluated with composite Simpson quadrature.
    """
    if k <= 1:
        raise OperatorError("mollifier requires k > 1")
    f = np.asarray(samples, dtype=float)
    M = len(f)
    R = 4 * M
    xs = np.arange(R) / R
    fine = np.interp(xs, np.arange(M + 1) / M, np.append(f, f[0]))
    offsets = np.arange(-R // 2, R // 2 + 1) / R
    w = _simpson_weights(R, 1.0 / R) * bump(offsets, k)
    w /= w.sum()
    out = np.empty(M)
    for i in range(M):
        j = (4 * i + np.arange(-R // 2, R // 2 + 1)) % R
        out[i] = w @ fine[j]
    return out


# ----------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class PotentialSpec:
    """Pair potential of the distance r, clamped outside [r_min, r_max]."""

    kind: str = "lennard_jones"
    epsilon: float = 1.0
    sigma: float = 0.5
    delta: float = 0.25
    r_min: float = 0.25
    r_max: float = 1.0
    v_scale: float | None = None
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("lennard_jones", "quadratic", "inverse_power"):
            raise OperatorError(f"unknown potential kind {self.kind!r}")
        if not (0 < self.delta <= 0.5):
            raise OperatorError("delta must lie in (0, 1/2]")
        if not (0 < self.r_min < self.r_max):
            raise OperatorError("need 0 < r_min < r_max")
        if self.kind != "quadratic" and self.delta > self.r_min:
            raise OperatorError("need delta <= r_min")

    def raw(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "lennard_jones":
            s = self.sigma / r
            return 4 * self.epsilon * (s**12 - s**6)
        if self.kind == "quadratic":
            return r**2
        return r ** (-self.c)

    def clamped_raw(self, r):
        if self.kind == "quadratic":
            return self.raw(r)
        r = np.clip(np.asarray(r, dtype=float), self.r_min, self.r_max)
        return self.raw(r)

    @property
    def scale(self) -> float:
        if self.v_scale is not None:
            return float(self.v_scale)
        if self.kind == "quadratic":
            return 1.0
        rs = np.linspace(self.r_min, self.r_max, 4097)
        extra = [self.r_min, self.r_max]
        if self.kind == "lennard_jones":
            extra.append(np.clip(2 ** (1 / 6) * self.sigma, self.r_min, self.r_max))
        return float(np.max(np.abs(self.raw(np.concatenate([rs, extra])))))


def potential_value(spec: PotentialSpec, r):
    """Clamped potential divided by its scale, so sup|V| = 1 by default."""
    if np.any(np.asarray(r) < 0):
        raise OperatorError("r must be >= 0")
    return spec.clamped_raw(r) / spec.scale


# ----------------------------------------------------------------------------
# Multi-particle operators


def register_coords(index: int, n: int, registers: int) -> list[int]:
    N = 2**n
    return [(index // N**s) % N for s in range(registers)]


def pair_sq_distance(coords, i: int, j: int, d: int, shift=None) -> float:
    """Grid squared distance; ``shift=(k, l)`` offsets particle i's k-th coordinate (mod N handled by caller)."""
    s = 0
    for k in range(d):
        ai = coords[i * d + k]
        if shift is not None and shift[0] == k:
            ai = shift[2](ai + shift[1])
        s += (ai - coords[j * d + k]) ** 2
    return s


def potential_of_y(spec: PotentialSpec, y):
    """Potential as a function of the normalized squared distance y = r^2.

    Distances are measured in units where the largest separation along one
    axis, N-1 grid steps, times sqrt(d) equals 1.
    """
    return potential_value(spec, np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0)))


def pair_potential_diag(n: int, d: int, spec: PotentialSpec | None, i: int, j: int, eta: int,
                        shift=None, value=None) -> np.ndarray:
    """Diagonal of V(alpha^i, alpha^j) over the eta*d-register grid.

    ``value`` maps the integer squared grid distance to the potential; by
    default it evaluates ``spec`` on the normalized squared distance.
    """
    N = 2**n
    R = eta * d
    lam = d * (N - 1) ** 2
    out = np.zeros(N**R)
    for idx in range(N**R):
        co = register_coords(idx, n, R)
        sh = None if shift is None else (shift[0], shift[1], lambda v: v % N)
        s2 = pair_sq_distance(co, i, j, d, sh)
        out[idx] = value(s2) if value is not None else potential_of_y(spec, s2 / lam)
    return out


def gradient_diag(n, d, a, i, j, k, eta, value) -> np.ndarray:
    """sum_{1<=|l|<=a} c_l V(alpha^i + l e_k, alpha^j), shifted modulo N."""
    c = first_derivative_coefficients(a)
    out = np.zeros((2**n) ** (eta * d))
    for l, cl in zip(range(-a, a + 1), c):
        if l == 0:
            continue
        out += cl * pair_potential_diag(n, d, None, i, j, eta, shift=(k, l), value=value)
    return out


def derivative_on_register(n, a, slot, slots) -> np.ndarray:
    return kron_slot(first_derivative_matrix_1d(n, a), slot, slots, 2**n)


def convective_matrix(grid: GridSpec, stencil: StencilSpec | int, value, limit: int = DENSE_LIMIT) -> DenseOperator:
    """sum_i sum_{j<i} sum_k diag(d_k^i V_ij) D_k^i (diagonal then derivative).

    ``value`` maps the integer squared grid distance to V.
    """
    a = stencil.a if isinstance(stencil, StencilSpec) else int(stencil)
    n, d, eta = grid.n, grid.d, grid.eta
    dim = grid.dim
    if dim > limit:
        raise OperatorError(f"dense dimension {dim} exceeds limit {limit}")
    out = np.zeros((dim, dim))
    for i in range(eta):
        for j in range(i):
            for k in range(d):
                g = gradient_diag(n, d, a, i, j, k, eta, value)
                out += g[:, None] * derivative_on_register(n, a, i * d + k, eta * d)
    return DenseOperator(out, "diag(grad V) then first-derivative stencil, h factored out")


def solve_bvp(op: DenseOperator | np.ndarray, rhs, lstsq_fallback: bool = False) -> np.ndarray:
    A = op.entries if isinstance(op, DenseOperator) else np.asarray(op)
    b = np.asarray(rhs, dtype=float)
    try:
        # Singular systems are caught by the residual check below.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            x = sla.solve(A, b)
    except (sla.LinAlgError, ValueError) as exc:
        if not lstsq_fallback:
            raise OperatorError("singular system") from exc
        x = sla.lstsq(A, b)[0]
    res = np.linalg.norm(A @ x - b)
    if res > 1e-10 * max(np.linalg.norm(b), 1e-300) and not lstsq_fallback:
        raise OperatorError(f"residual {res:.3e} too large; system is singular or ill-conditioned")
    return x


def export_csv(op: DenseOperator | np.ndarray) -> str:
    A = op.entries if isinstance(op, DenseOperator) else np.asarray(op)
    return "\n".join(",".join(repr(float(v)) for v in row) for row in A) + "\n"


def export_sparse(op: DenseOperator | np.ndarray) -> dict:
    A = op.entries if isinstance(op, DenseOperator) else np.asarray(op)
    i, j = np.nonzero(A)
    return {"dim": int(A.shape[0]), "triplets": [[int(a), int(b), float(A[a, b])] for a, b in zip(i, j)]}


def pair_count(eta: int) -> int:
    return comb(eta, 2)
