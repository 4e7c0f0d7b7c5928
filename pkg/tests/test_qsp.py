import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from ellipqbe.block_encoding import EncodingError, extract_block, make_encoding
from ellipqbe.circuit import Gate
from ellipqbe.potential import position_be
from ellipqbe.qsp import (
    PolynomialApprox,
    QspError,
    chebyshev_fit,
    degree_for_inverse_power,
    qsp_apply,
    qsp_phases,
    qsp_response,
)


def ansatz(phases, x):
    """<0| e^{i phi_0 Z} prod_k W(x) e^{i phi_k Z} |0> from explicit 2x2 products."""
    s = np.sqrt(1 - x * x)
    W = np.array([[x, 1j * s], [1j * s, x]])
    U = np.diag([np.exp(1j * phases[0]), np.exp(-1j * phases[0])])
    for p in phases[1:]:
        U = U @ W @ np.diag([np.exp(1j * p), np.exp(-1j * p)])
    return U[0, 0]


def exact(coef):
    return PolynomialApprox(tuple(coef), (-1.0, 1.0), 0.0, None)


# ---------------------------------------------------------------- degree formula


def test_degree_example():
    assert degree_for_inverse_power(6, 1 / 8, 1e-3) == 664


@pytest.mark.parametrize("c,delta,eps", [(1, 1 / 4, 1e-3), (3, 1 / 8, 1e-2), (0.5, 1 / 16, 1e-4)])
def test_degree_doubles_with_inverse_delta(c, delta, eps):
    d1 = degree_for_inverse_power(c, delta, eps)
    d2 = degree_for_inverse_power(c, delta / 2, eps)
    assert abs(d2 - 2 * d1) <= 1


@given(st.floats(0.01, 1.0), st.floats(0.01, 0.5), st.floats(1e-6, 0.5))
def test_degree_small_c_collapses(c, delta, eps):
    assert degree_for_inverse_power(c, delta, eps) == degree_for_inverse_power(1.0, delta, eps)


@pytest.mark.parametrize("delta,eps", [(0.0, 0.1), (0.6, 0.1), (0.25, 0.0), (0.25, 0.7)])
def test_degree_rejects_out_of_range(delta, eps):
    with pytest.raises(EncodingError):
        degree_for_inverse_power(1.0, delta, eps)


# ---------------------------------------------------------------- fitting


def test_fit_identity_exact():
    p = chebyshev_fit(lambda x: x, 1, mode="interpolate")
    assert p.sup_error < 1e-14
    xs = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(p(xs), xs, atol=1e-14)


def test_fit_square_on_unit_interval():
    p = chebyshev_fit(lambda x: x * x, 2, window=(0.0, 1.0), mode="interpolate")
    assert p.sup_error < 1e-14
    xs = np.linspace(0, 1, 11)
    np.testing.assert_allclose(p(xs), xs**2, atol=1e-14)


@pytest.mark.parametrize("parity", [None, "even", "odd"])
def test_extend_fit_bounded(parity):
    f = {None: np.exp, "even": np.cos, "odd": np.sin}[parity]
    p = chebyshev_fit(lambda x: 0.5 * f(x), 10, window=(0.1, 0.9), parity=parity)
    dense = np.linspace(-1, 1, 1024)
    assert np.max(np.abs(p.realized(dense))) <= 1 + 1e-9
    xs = np.linspace(0.1, 0.9, 200)
    assert np.max(np.abs(p(xs) - 0.5 * f(xs))) <= p.sup_error + 1e-12


def test_fit_rejects_bad_input():
    with pytest.raises(EncodingError), np.errstate(divide="ignore"):
        chebyshev_fit(lambda x: 1 / x, 4, window=(0.0, 1.0))
    with pytest.raises(EncodingError):
        chebyshev_fit(lambda x: x, 3, window=(0.5, 1.5))
    with pytest.raises(EncodingError):
        chebyshev_fit(lambda x: x, 3, mode="spline")


@pytest.mark.parametrize("delta", [1 / 4, 1 / 8, 1 / 16])
def test_inverse_power_envelope(delta):
    # The bounded, even inverse-power target of the degree lemma: (delta / x) on [delta, 1].
    eps = 1e-3
    deg = degree_for_inverse_power(1.0, delta, eps)
    p = chebyshev_fit(lambda x: delta / np.maximum(np.abs(x), delta), deg, window=(delta, 1.0))
    assert p.sup_error <= eps
    xs = np.linspace(delta, 1, 5000)
    assert np.max(np.abs(p(xs) - delta / xs)) <= eps


# ---------------------------------------------------------------- phases


def test_phases_identity_polynomial():
    ph = qsp_phases(exact([0.0, 1.0]))
    np.testing.assert_allclose(ph.phases, (0.0, 0.0), atol=1e-12)
    assert ph.parity == "odd"


@pytest.mark.parametrize("d", [1, 2, 3, 6, 9])
def test_zero_phases_give_chebyshev(d):
    xs = np.linspace(-1, 1, 17)
    T = C.chebval(xs, [0] * d + [1])
    np.testing.assert_allclose(qsp_response(np.zeros(d + 1), xs), T, atol=1e-12)
    np.testing.assert_allclose([ansatz(np.zeros(d + 1), x).real for x in xs], T, atol=1e-12)


def test_response_matches_explicit_ansatz(rng):
    phases = rng.uniform(-np.pi, np.pi, 7)
    xs = np.linspace(-1, 1, 13)
    np.testing.assert_allclose(qsp_response(phases, xs), [ansatz(phases, x).real for x in xs], atol=1e-12)


def test_x4_round_trip():
    p = chebyshev_fit(lambda x: x**4, 8, parity="even")
    ph = qsp_phases(p)
    assert ph.residual < 1e-8
    xs = np.linspace(-1, 1, 1024)
    got = np.array([ansatz(ph.phases, x).real for x in xs])
    np.testing.assert_allclose(got, p.realized(xs), atol=1e-7)
    assert np.max(np.abs(got)) <= 1 + 1e-9


@given(st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=5), st.booleans())
def test_phases_realize_random_definite_parity(coef, odd):
    c = np.zeros(2 * len(coef) + 1)
    c[(1 if odd else 0)::2][: len(coef)] = coef
    c /= max(1.0, np.sum(np.abs(c)) / 0.9)
    ph = qsp_phases(exact(c))
    xs = np.linspace(-1, 1, 64)
    np.testing.assert_allclose([ansatz(ph.phases, x).real for x in xs], C.chebval(xs, c), atol=1e-7)


def test_phases_reject_indefinite_parity():
    with pytest.raises(QspError):
        qsp_phases(exact([0.2, 0.3, 0.1]))


# ---------------------------------------------------------------- singular value transform


def test_apply_identity_polynomial_unchanged():
    base = position_be(2)
    out = qsp_apply(base, qsp_phases(exact([0.0, 1.0])))
    np.testing.assert_allclose(extract_block(out), extract_block(base), atol=1e-10)


def test_apply_t2():
    base = position_be(2)
    x = np.arange(4) / 3
    out = qsp_apply(base, exact([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(extract_block(out), np.diag(2 * x**2 - 1), atol=1e-10)


@pytest.mark.parametrize("parity", ["even", "odd", None])
def test_apply_commutes_with_eigenbasis(parity):
    f = {"even": lambda x: 0.7 * np.cos(3 * x), "odd": lambda x: 0.7 * np.sin(3 * x),
         None: lambda x: 0.4 * np.exp(x)}[parity]
    p = chebyshev_fit(f, 9, parity=parity)
    base = position_be(3)
    x = np.arange(8) / 7
    out = qsp_apply(base, p)
    B = out.lam * extract_block(out)
    np.testing.assert_allclose(np.diag(B).real, p(x), atol=1e-8)
    assert np.max(np.abs(B - np.diag(np.diag(B)))) < 1e-10
    assert out.lam == pytest.approx(p.scale * (2 if parity is None else 1))


def test_apply_rejects_non_hermitian():
    gates = [Gate("H", (1,)), Gate("P", (0,), ((1, 1),), (0.3,)), Gate("H", (1,))]
    enc = make_encoding(gates, 1.0, 1, 0, 1, "non_hermitian")
    with pytest.raises(EncodingError):
        qsp_apply(enc, exact([0.0, 1.0]))
