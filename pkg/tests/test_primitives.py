import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ellipqbe import primitives as pr
from ellipqbe.circuit import Circuit, CircuitError, count_resources, inverse, simulate, unitary_of


def shift_oracle(n, j):
    N = 2**n
    S = np.zeros((N, N))
    for l in range(N):
        S[(l + j) % N, l] = 1
    return S


def data_block(c, n):
    """Restriction of a circuit with clean workspace above the first n qubits."""
    return unitary_of(c)[: 2**n, : 2**n]


def basis_run(c, value):
    out = simulate(c, np.eye(2**c.num_qubits)[value]).amplitudes
    return int(np.argmax(np.abs(out))), out


def test_incrementer_one_qubit_is_x():
    c = pr.incrementer(1)
    assert len(c.gates) == 1 and c.gates[0].kind == "X" and not c.gates[0].controls


def test_incrementer_two_qubits_wraps():
    assert basis_run(pr.incrementer(2), 3)[0] == 0


@pytest.mark.parametrize("method", ["ladder", "cascade"])
@pytest.mark.parametrize("n", range(1, 7))
def test_incrementer_is_cyclic_shift(n, method):
    c = pr.incrementer(n, method)
    np.testing.assert_allclose(data_block(c, n), shift_oracle(n, 1), atol=1e-12)


def test_incrementer_ladder_restores_workspace():
    n = 5
    c = pr.incrementer(n)
    U = unitary_of(c)
    # All weight of workspace-zero inputs stays in the workspace-zero block.
    np.testing.assert_allclose(np.abs(U[: 2**n, : 2**n]).sum(axis=0), 1, atol=1e-12)


def test_incrementer_bad_inputs():
    with pytest.raises(CircuitError):
        pr.increment_gates(range(4), range(1))
    with pytest.raises(CircuitError):
        pr.increment_gates(range(3), range(1), method="magic")


def test_decrementer_is_inverse():
    for n in (2, 3, 4):
        assert np.allclose(data_block(pr.decrementer(n), n), shift_oracle(n, -1))
        dec = unitary_of(inverse(pr.incrementer(n)))
        np.testing.assert_allclose(dec, unitary_of(pr.decrementer(n)))


def test_shift_examples():
    assert pr.shift_by(3, 0).gates == ()
    c = Circuit(4, pr.shift_by(3, 2).gates + pr.shift_by(3, -2).gates)
    np.testing.assert_allclose(data_block(c, 3), np.eye(8), atol=1e-12)
    np.testing.assert_allclose(data_block(pr.shift_by(3, 3), 3), np.linalg.matrix_power(shift_oracle(3, 1), 3))
    s1 = pr.shift_by(3, 1)
    np.testing.assert_allclose(data_block(Circuit(4, s1.gates * 2), 3), data_block(pr.shift_by(3, 2), 3))
    with pytest.raises(CircuitError):
        pr.shift_by(3, 8)


@given(st.integers(1, 5), st.data())
def test_shift_composition(n, data):
    N = 2**n
    j = data.draw(st.integers(-(N - 1), N - 1))
    k = data.draw(st.integers(-(N - 1), N - 1))
    a, b = pr.shift_by(n, j), pr.shift_by(n, k)
    width = max(a.num_qubits, b.num_qubits)
    both = Circuit(width, a.gates + b.gates)
    total = (j + k) % N
    np.testing.assert_allclose(data_block(both, n), shift_oracle(n, total), atol=1e-12)


def test_toffoli_counts_of_incrementers():
    assert count_resources(Circuit(3, (pr.Gate("X", (2,), ((0, 1), (1, 1))),))).toffoli_estimate == 1
    for n in range(3, 9):
        casc = count_resources(pr.incrementer(n, "cascade"))
        assert casc.mcx_histogram == {w: 1 for w in range(1, n)}
        assert casc.toffoli_estimate == sum(2 * (w - 2) + 1 if w > 2 else int(w == 2) for w in range(1, n))
    ns = np.arange(4, 11)
    ladder = [count_resources(pr.incrementer(int(n))).toffoli_estimate for n in ns]
    assert ladder == [2 * n - 4 for n in ns]
    slope = np.polyfit(ns, ladder, 1)[0]
    assert 1.5 <= slope <= 2.5


def test_reflection_examples():
    np.testing.assert_array_equal(unitary_of(pr.reflection(2, [0])).real, np.diag([-1, 1, 1, 1]))
    c = pr.reflection(4, [5])
    mcz = [g for g in c.gates if g.kind == "Z"]
    assert len(mcz) == 1 and len(mcz[0].controls) == 3
    assert all(g.kind == "X" and not g.controls for g in c.gates if g.kind != "Z")
    assert count_resources(pr.reflection(4, [1, 7, 9])).mcx_histogram == {3: 3}
    with pytest.raises(CircuitError):
        pr.reflection(2, [])
    with pytest.raises(CircuitError):
        pr.reflection(2, [4])


@given(st.sets(st.integers(0, 15), min_size=1))
def test_reflection_involution(A):
    R = unitary_of(pr.reflection(4, sorted(A)))
    np.testing.assert_allclose(R @ R, np.eye(16), atol=1e-12)
    expected = np.ones(16)
    expected[sorted(A)] = -1
    np.testing.assert_allclose(np.diag(R).real, expected)


@given(st.integers(0, 15), st.integers(0, 15))
def test_disjoint_reflections_commute(a, b):
    if a == b:
        return
    Ra, Rb = unitary_of(pr.reflection(4, [a])), unitary_of(pr.reflection(4, [b]))
    np.testing.assert_allclose(Ra @ Rb, Rb @ Ra, atol=1e-12)


def test_parity_kickback():
    f = unitary_of(pr.parity_kickback("f"))
    np.testing.assert_allclose(np.diag(f).real, [1, -1, -1, 1])
    fp = unitary_of(pr.parity_kickback("f'"))
    X0 = np.kron(np.eye(2), np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(fp, X0 @ f @ X0)
    with pytest.raises(CircuitError):
        pr.parity_kickback("g")


def _run_arith(c, regs):
    """Run a classical reversible circuit on register values in c.registers order."""
    x = 0
    for name, val in regs.items():
        s, _ = c.registers[name]
        x |= val << s
    y, amps = basis_run(c, x)
    assert abs(abs(amps[y]) - 1) < 1e-12
    return {name: (y >> s) & ((1 << n) - 1) for name, (s, n) in c.registers.items()}


def test_comparator_examples():
    c = pr.comparator(2)
    assert _run_arith(c, {"i": 2, "j": 3})["flag"] == 0
    assert _run_arith(c, {"i": 3, "j": 3})["flag"] == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_comparator_truth_table(n):
    c = pr.comparator(n)
    for i in range(2**n):
        for j in range(2**n):
            out = _run_arith(c, {"i": i, "j": j})
            assert out == {"i": i, "j": j, "flag": int(i >= j), "carry": 0}


def test_diff_examples():
    c = pr.diff(3)
    assert _run_arith(c, {"i": 5, "j": 3})["j"] == 2
    assert _run_arith(c, {"i": 1, "j": 3})["j"] == 6


@pytest.mark.parametrize("n", [1, 2, 3])
def test_diff_truth_table_and_inverse(n):
    c = pr.diff(n)
    inv = inverse(c)
    for i in range(2**n):
        for j in range(2**n):
            out = _run_arith(c, {"i": i, "j": j})
            assert out == {"i": i, "j": (i - j) % 2**n, "carry": 0}
            assert _run_arith(inv, out) == {"i": i, "j": j, "carry": 0}


def test_adder_truth_table():
    n = 3
    regs = {"a": (0, n), "b": (n, n), "c": (2 * n, 1)}
    c = Circuit(2 * n + 1, tuple(pr.add_gates(range(n), range(n, 2 * n), 2 * n)), regs)
    for a in range(8):
        for b in range(8):
            assert _run_arith(c, {"a": a, "b": b}) == {"a": a, "b": (a + b) % 8, "c": 0}


def test_uniform_prep_examples():
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(unitary_of(pr.uniform_prep(2)), H, atol=1e-12)
    np.testing.assert_allclose(unitary_of(pr.uniform_prep(4)), np.kron(H, H), atol=1e-12)
    amps = simulate(pr.uniform_prep(3), [1, 0, 0, 0]).amplitudes
    np.testing.assert_allclose(amps, np.array([1, 1, 1, 0]) / np.sqrt(3), atol=1e-12)
    with pytest.raises(CircuitError):
        pr.uniform_prep(0)


def test_prep_state_examples():
    c = pr.prep_state([1])
    assert c.num_qubits == 0 and not c.gates
    amps = simulate(pr.prep_state([1, -2, 1]), [1, 0, 0, 0]).amplitudes
    np.testing.assert_allclose(amps, [0.5, 1 / np.sqrt(2), 0.5, 0], atol=1e-12)
    assert pr.CoefficientVector((1, -2, 1)).lam == 4
    with pytest.raises(CircuitError):
        pr.CoefficientVector((0.0, 0.0))


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=9))
def test_prep_state_normalized_and_invertible(vals):
    if sum(abs(v) for v in vals) < 1e-6:
        vals = vals + [1.0]
    c = pr.prep_state(vals)
    dim = 2**c.num_qubits
    e0 = np.eye(dim)[0]
    amps = simulate(c, e0).amplitudes
    assert abs(np.sum(np.abs(amps) ** 2) - 1) < 1e-12
    w = np.abs(np.array(vals))
    np.testing.assert_allclose(np.abs(amps[: len(vals)]) ** 2, w / w.sum(), atol=1e-12)
    back = simulate(inverse(c), amps).amplitudes
    np.testing.assert_allclose(back, e0, atol=1e-12)


def test_marked_set():
    m = pr.MarkedSet((3, 1), 8)
    assert m.indices == (1, 3)
    assert m.shifted(6).indices == (1, 7)
    with pytest.raises(CircuitError):
        pr.MarkedSet((1, 1), 8)
    with pytest.raises(CircuitError):
        pr.MarkedSet((8,), 8)


def test_sizes():
    assert [pr.nbits(k) for k in (1, 2, 3, 4, 5)] == [0, 1, 2, 2, 3]
    assert [pr.work_size(n) for n in (1, 2, 3, 6)] == [0, 0, 1, 4]
