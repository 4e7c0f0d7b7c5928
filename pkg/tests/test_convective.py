from math import comb

import numpy as np
import pytest

from ellipqbe import convective as cv
from ellipqbe import fd_reference as fd
from ellipqbe.block_encoding import EncodingError, extract_block
from ellipqbe.potential import fit_potential
from ellipqbe.qsp import PolynomialApprox

from conftest import LJ_DEGREE, circulant, lj_spec, vandermonde_stencil

QUAD = fd.PotentialSpec("quadratic")


def scaled(enc):
    return enc.lam * extract_block(enc)


def brute_convective(n, d, eta, a, value):
    """Entry-by-entry sum over pairs j < i and dimensions of (grad_k^i V_ij)(x) D_k^i[x, y]."""
    N = 2**n
    R = d * eta
    dim = N**R
    c = vandermonde_stencil(a, 1)
    lam = d * (N - 1) ** 2
    co = np.array([[(x // N**s) % N for s in range(R)] for x in range(dim)])

    def V(cc, i, j):
        return value(sum((cc[i * d + k] - cc[j * d + k]) ** 2 for k in range(d)) / lam)

    M = np.zeros((dim, dim))
    for x in range(dim):
        for i in range(eta):
            for j in range(i):
                for k in range(d):
                    g = 0.0
                    for l in range(-a, a + 1):
                        sh = co[x].copy()
                        sh[i * d + k] = (sh[i * d + k] + l) % N
                        g += c[l + a] * V(sh, i, j)
                    for l in range(-a, a + 1):
                        y = co[x].copy()
                        y[i * d + k] = (y[i * d + k] + l) % N
                        M[x, int(sum(v * N**s for s, v in enumerate(y)))] += g * c[l + a]
    return M


# ---------------------------------------------------------------- first derivative


def test_first_derivative_n2():
    enc = cv.first_derivative_be(2, 1, 1, 1)
    assert enc.lam == pytest.approx(1.0)
    np.testing.assert_allclose(scaled(enc), circulant(4, [-0.5, 0, 0.5]), atol=1e-12)
    np.testing.assert_allclose(scaled(enc)[0], [0, 0.5, 0, -0.5], atol=1e-12)


@pytest.mark.parametrize("n,d,eta,a", [(3, 1, 1, 1), (3, 1, 1, 3), (2, 2, 1, 1), (2, 1, 2, 1), (4, 1, 1, 2)])
def test_first_derivative_oracle(n, d, eta, a):
    enc = cv.first_derivative_be(n, d, eta, a)
    c = vandermonde_stencil(a, 1)
    one = circulant(2**n, c)
    ref = fd.assemble_dd([one] * d, d, eta).entries
    np.testing.assert_allclose(scaled(enc), ref, atol=1e-10)
    np.testing.assert_allclose(scaled(enc), -scaled(enc).T, atol=1e-10)
    assert enc.lam == pytest.approx(np.abs(c).sum() * d * eta)


@pytest.mark.parametrize("a", [1, 2])
def test_first_derivative_convergence(a):
    errs = []
    for n in (4, 5, 6):
        N = 2**n
        x = np.arange(N) / N
        D = scaled(cv.first_derivative_be(n, 1, 1, a))
        errs.append(np.max(np.abs(D @ np.sin(2 * np.pi * x) * N - 2 * np.pi * np.cos(2 * np.pi * x))))
    slope = np.polyfit(np.log([16, 32, 64]), np.log(errs), 1)[0]
    assert slope == pytest.approx(-2 * a, abs=0.3)


def test_first_derivative_rejects_wide_stencil():
    with pytest.raises(EncodingError):
        cv.first_derivative_1d(2, 2)


# ---------------------------------------------------------------- convective


def test_request_validation():
    with pytest.raises(EncodingError):
        cv.ConvectiveRequest(fd.GridSpec(2, 1, 1))
    with pytest.raises(EncodingError):
        cv.ConvectiveRequest(fd.GridSpec(2, 1, 2), a=2)
    with pytest.raises(EncodingError):
        cv.ConvectiveRequest(fd.GridSpec(2, 1, 2), 1, lj_spec())


def test_request_round_trip():
    req = cv.ConvectiveRequest(fd.GridSpec(2, 2, 3), 1, lj_spec(), LJ_DEGREE)
    back = cv.ConvectiveRequest.from_dict(req.to_dict())
    assert back == req


@pytest.mark.parametrize("n,d,eta", [(3, 1, 2), (2, 2, 2), (2, 1, 3)])
def test_quadratic_matches_brute_force(n, d, eta):
    req = cv.ConvectiveRequest(fd.GridSpec(n, d, eta))
    enc = cv.convective_be(req)
    ref = brute_convective(n, d, eta, 1, lambda y: y)
    np.testing.assert_allclose(scaled(enc), ref, atol=1e-10)
    np.testing.assert_allclose(cv.convective_reference(req), ref, atol=1e-12)


def test_eta2_reduces_to_single_term():
    req = cv.ConvectiveRequest(fd.GridSpec(3, 1, 2))
    full = cv.convective_be(req)
    term = cv.convective_term_be(3, 1, 1, QUAD, None, 1, 0)
    np.testing.assert_allclose(scaled(full), scaled(term), atol=1e-10)
    assert full.lam == pytest.approx(term.lam)


@pytest.mark.parametrize("n,d,eta", [(2, 1, 2), (2, 1, 3), (2, 1, 4), (2, 2, 3), (3, 2, 2)])
def test_lambda_bookkeeping(n, d, eta):
    enc = cv.convective_be(cv.ConvectiveRequest(fd.GridSpec(n, d, eta)))
    single = cv._pair_dim_term(n, d, 1, QUAD, None, 1, 0, 0, eta)
    assert abs(enc.lam - d * comb(eta, 2) * single.lam) < 1e-12


def test_zero_potential_gives_zero_block():
    zero = PolynomialApprox((0.0,), (-1.0, 1.0), 0.0, "even")
    req = cv.ConvectiveRequest(fd.GridSpec(2, 1, 3), 1, lj_spec(), 8)
    enc = cv.convective_be(req, zero)
    assert np.max(np.abs(extract_block(enc))) < 1e-12


def test_exchange_relabels_registers():
    n, N = 2, 4
    t10 = scaled(cv.convective_term_be(n, 1, 1, QUAD, None, 1, 0))
    t01 = scaled(cv.convective_term_be(n, 1, 1, QUAD, None, 0, 1))
    P = np.zeros((N * N, N * N))
    for x in range(N * N):
        P[(x // N) + N * (x % N), x] = 1
    np.testing.assert_allclose(P @ t10 @ P.T, t01, atol=1e-10)


def test_term_rejects_bad_pair():
    with pytest.raises(EncodingError):
        cv.convective_term_be(2, 1, 1, QUAD, None, 1, 1)


@pytest.mark.parametrize("n,d", [(2, 1), (3, 1)])
def test_lj_pair_within_tolerance(n, d):
    req = cv.ConvectiveRequest(fd.GridSpec(n, d, 2), 1, lj_spec(), LJ_DEGREE)
    poly = req.polynomial()
    enc = cv.convective_be(req, poly)
    err = np.max(np.abs(scaled(enc) - cv.convective_reference(req)))
    assert err <= cv.convective_tolerance(req, poly)


def test_polynomial_is_lj_fit():
    req = cv.ConvectiveRequest(fd.GridSpec(2, 1, 2), 1, lj_spec(), LJ_DEGREE)
    assert req.polynomial().coefficients == fit_potential(lj_spec(), LJ_DEGREE).coefficients
    assert cv.ConvectiveRequest(fd.GridSpec(2, 1, 2)).polynomial() is None


def test_toffoli_monotone_in_eta():
    counts = [cv.convective_be(cv.ConvectiveRequest(fd.GridSpec(2, 1, e))).resources().toffoli_estimate
              for e in (2, 3, 4)]
    assert counts == sorted(counts) and counts[0] < counts[-1]
