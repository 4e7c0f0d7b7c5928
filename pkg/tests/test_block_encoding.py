import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ellipqbe import block_encoding as be
from ellipqbe import laplacian as lp
from ellipqbe.circuit import Circuit, Gate, unitary_of
from ellipqbe.primitives import shift_by

from conftest import circulant, random_circuit


def work_block(c, ns):
    return unitary_of(c)[: 2**ns, : 2**ns]


def random_lcu(seed, ns=2, nw=1, terms=3):
    rng = np.random.default_rng(seed)
    units = [random_circuit(rng, ns + nw) for _ in range(terms)]
    coeffs = rng.normal(size=terms)
    enc = be.lcu(coeffs, units, nw)
    target = sum(c * work_block(u, ns) for c, u in zip(coeffs, units))
    return enc, target


def test_single_unitary_lcu():
    c = Circuit(2, (Gate("H", (0,)), Gate("X", (1,), ((0, 1),))))
    enc = be.lcu([1.0], [c])
    assert enc.lam == 1 and enc.q == 0
    np.testing.assert_allclose(be.extract_block(enc), unitary_of(c), atol=1e-12)


def test_lcu_laplacian_row_pattern():
    units = [shift_by(2, j) for j in (-1, 0, 1)]
    units = [Circuit(2, u.gates) for u in units]
    enc = be.lcu([1, -2, 1], units)
    assert enc.lam == 4
    np.testing.assert_allclose(4 * be.extract_block(enc), circulant(4, [1, -2, 1]), atol=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_lcu_matches_matrix_sum(seed, terms):
    enc, target = random_lcu(seed, terms=terms)
    np.testing.assert_allclose(enc.lam * be.extract_block(enc), target, atol=1e-12)


def test_extract_identity_and_periodic():
    ident = be.unitary_encoding(Circuit(2))
    np.testing.assert_array_equal(be.extract_block(ident), np.eye(4))
    np.testing.assert_allclose(be.extract_block(lp.periodic_1d(2, 1)), circulant(4, [1, -2, 1]) / 4, atol=1e-12)


def test_extract_ceiling():
    with pytest.raises(be.EncodingError):
        be.extract_block(be.unitary_encoding(Circuit(4)), ceiling=3)


def test_be_add_identity_and_cancellation():
    enc, target = random_lcu(7)
    one = be.be_add([enc], [1.0])
    np.testing.assert_allclose(one.lam * be.extract_block(one), target, atol=1e-12)
    X = be.unitary_encoding(Circuit(1, (Gate("X", (0,)),)))
    mX = be.unitary_encoding(Circuit(1, (Gate("X", (0,)), Gate("GPHASE", (), (), (np.pi,)))))
    zero = be.be_add([X, mX], [0.5, 0.5])
    assert np.abs(be.extract_block(zero)).max() < 1e-12


@given(st.integers(0, 10**6), st.booleans())
def test_be_add_lambda_and_block(seed, flag):
    rng = np.random.default_rng(seed)
    a, ta = random_lcu(seed)
    b, tb = random_lcu(seed + 1, terms=2)
    w = rng.normal(size=2)
    s = be.be_add([a, b], w, select_flag=flag)
    assert abs(s.lam - (abs(w[0]) * a.lam + abs(w[1]) * b.lam)) < 1e-12
    np.testing.assert_allclose(s.lam * be.extract_block(s), w[0] * ta + w[1] * tb, atol=1e-11)


@given(st.integers(0, 10**6))
def test_select_flag_lcu_equivalent(seed):
    rng = np.random.default_rng(seed)
    units = [random_circuit(rng, 3) for _ in range(3)]
    coeffs = rng.normal(size=3)
    plain = be.lcu(coeffs, units, 1)
    flagged = be.lcu(coeffs, units, 1, select_flag=True)
    assert flagged.work_qubits == plain.work_qubits + 1
    np.testing.assert_allclose(be.extract_block(flagged), be.extract_block(plain), atol=1e-12)


@given(st.integers(0, 10**6))
def test_be_multiply(seed):
    # Products need workspace restored by each factor, so these factors use none.
    a, ta = random_lcu(seed, ns=3, nw=0)
    b, tb = random_lcu(seed + 5, ns=3, nw=0)
    p = be.be_multiply(a, b)
    assert abs(p.lam - a.lam * b.lam) < 1e-12
    np.testing.assert_allclose(p.lam * be.extract_block(p), ta @ tb, atol=1e-11)


@given(st.integers(0, 10**6))
def test_multiply_associative(seed):
    a, ta = random_lcu(seed, nw=0, terms=2)
    b, tb = random_lcu(seed + 1, nw=0, terms=2)
    c, tc = random_lcu(seed + 2, nw=0, terms=2)
    left = be.be_multiply(be.be_multiply(a, b), c)
    right = be.be_multiply(a, be.be_multiply(b, c))
    np.testing.assert_allclose(be.extract_block(left), be.extract_block(right), atol=1e-11)
    np.testing.assert_allclose(left.lam * be.extract_block(left), ta @ tb @ tc, atol=1e-10)


def test_unitary_times_inverse():
    rng = np.random.default_rng(3)
    c = random_circuit(rng, 2)
    from ellipqbe.circuit import inverse

    p = be.be_multiply(be.unitary_encoding(c), be.unitary_encoding(inverse(c)))
    np.testing.assert_allclose(be.extract_block(p), np.eye(4), atol=1e-12)


def test_controlled_placement_matches_builder():
    enc, target = random_lcu(11)
    ns, nw = enc.system_qubits, enc.work_qubits
    ctl_q = enc.circuit.num_qubits
    g = enc.placed(list(range(ns)), list(range(ns, ns + nw)), list(range(ns + nw, ctl_q)), ((ctl_q, 1),))
    c = Circuit(ctl_q + 1, (Gate("X", (ctl_q,)), g, Gate("X", (ctl_q,))))
    # Control set high only inside the bracket, so the net effect is the encoding itself.
    U = unitary_of(c)
    np.testing.assert_allclose(U[: 2**ns, : 2**ns] * enc.lam, target, atol=1e-11)
    c0 = Circuit(ctl_q + 1, (g,))
    half = 2**ctl_q
    np.testing.assert_allclose(unitary_of(c0)[:half, :half], np.eye(half), atol=1e-12)


def test_scaled_identity():
    for v in (2.5, -1.5):
        s = be.scaled_identity(2, v)
        np.testing.assert_allclose(s.lam * be.extract_block(s), v * np.eye(4), atol=1e-12)
    z = be.scaled_identity(1, 0.0)
    assert np.abs(be.extract_block(z)).max() < 1e-12


def test_success_probability():
    ident = be.unitary_encoding(Circuit(2))
    assert be.success_probability(ident, np.eye(4)[1]) == 1.0
    enc, _ = random_lcu(5)
    psi = np.ones(4) / 2
    blk = be.extract_block(enc)
    assert abs(be.success_probability(enc, psi) - np.linalg.norm(blk @ psi) ** 2) < 1e-12
    with pytest.raises(be.EncodingError):
        be.success_probability(enc, np.ones(4))


@given(st.integers(0, 10**6))
def test_block_norm_at_most_one(seed):
    enc, _ = random_lcu(seed, terms=4)
    assert np.linalg.norm(be.extract_block(enc), 2) <= 1 + 1e-9


def test_encoding_validation():
    with pytest.raises(be.EncodingError):
        be.BlockEncoding(Circuit(1), 0.0, 1)
    with pytest.raises(be.EncodingError):
        be.BlockEncoding(Circuit(1), 1.0, 2)
    with pytest.raises(be.EncodingError):
        be.lcu([1, 2], [Circuit(1)])
    with pytest.raises(be.EncodingError):
        be.lcu([1, 2], [Circuit(1), Circuit(2)])
    with pytest.raises(be.EncodingError):
        be.be_add([be.unitary_encoding(Circuit(1)), be.unitary_encoding(Circuit(2))], [1, 1])


def test_verification_report_fields():
    enc = lp.periodic_1d(2, 1)
    rep = be.verification_report(enc, circulant(4, [1, -2, 1]))
    assert set(rep) >= {"descriptor", "lambda", "q", "system_qubits", "max_abs_error", "toffoli_estimate"}
    assert rep["max_abs_error"] < 1e-12 and rep["lambda"] == 4


def test_thread_count(monkeypatch):
    monkeypatch.setenv("ELLIPQBE_THREADS", "3")
    assert be.thread_count() == 3
    monkeypatch.setenv("ELLIPQBE_THREADS", "x")
    assert be.thread_count() == 1
    monkeypatch.setenv("ELLIPQBE_THREADS", "4")
    enc = lp.periodic_1d(3, 2)
    np.testing.assert_allclose(enc.lam * be.extract_block(enc),
                               circulant(8, [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]), atol=1e-12)
