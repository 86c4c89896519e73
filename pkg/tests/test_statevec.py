import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_gate, zz_exp
from qsvmcs import statevec as sv
from qsvmcs.encoders import zz_block

ANGLES = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)


def gates_for(n):
    out = []
    for q in range(n):
        out += [sv.H(q), sv.X(q), sv.Y(q), sv.Z(q), sv.RX(q, 0.37), sv.RZ(q, -1.3)]
        out += [sv.CNOT(q, t) for t in range(n) if t != q]
    return out


def _shuffled(gates, rng):
    return tuple(gates[i] for i in rng.permutation(len(gates)))


def test_hadamard_on_zero():
    s = sv.apply_gate(sv.Statevector.zero(1), sv.H(0))
    np.testing.assert_allclose(s.amplitudes, [2**-0.5, 2**-0.5], atol=1e-15)


def test_rz_on_zero_keeps_probabilities():
    s = sv.apply_gate(sv.Statevector.zero(1), sv.RZ(0, 1.234))
    np.testing.assert_allclose(sv.probabilities(s), [1.0, 0.0], atol=1e-15)


def test_cnot_makes_bell_state():
    # (|00> + |10>)/sqrt2 in ket order q1 q0 means qubit 1 carries the superposition
    plus = sv.Statevector(2, np.array([1, 0, 1, 0]) / np.sqrt(2))
    out = sv.apply_gate(plus, sv.CNOT(1, 0))
    np.testing.assert_allclose(out.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)
    # qubit 0 as control, per the LSB convention
    plus0 = sv.Statevector(2, np.array([1, 1, 0, 0]) / np.sqrt(2))
    out0 = sv.apply_gate(plus0, sv.CNOT(0, 1))
    np.testing.assert_allclose(out0.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)


def test_empty_circuit_is_identity():
    s = sv.random_state(3, np.random.default_rng(0))
    out = sv.apply_circuit(s, sv.Circuit(3, ()))
    assert np.array_equal(out.amplitudes, s.amplitudes)


def test_hh_is_identity():
    out = sv.apply_circuit(sv.Statevector.zero(1), sv.Circuit(1, (sv.H(0), sv.H(0))))
    np.testing.assert_allclose(out.amplitudes, [1, 0], atol=1e-12)


@pytest.mark.parametrize("angle", [0.0, np.pi / 4, 0.9, -2.1])
def test_zz_block_matches_matrix_exponential(angle):
    plus2 = np.full(4, 0.5, dtype=complex)
    got = sv.apply_circuit(sv.Statevector(2, plus2), sv.Circuit(2, tuple(zz_block(0, 1, angle))))
    want = zz_exp(angle) @ plus2
    # equal up to a global phase
    phase = np.vdot(want, got.amplitudes)
    np.testing.assert_allclose(got.amplitudes, want * phase / abs(phase), atol=1e-12)


def test_invalid_gates_rejected():
    with pytest.raises(sv.InvalidGateError):
        sv.Circuit(2, (sv.H(2),))
    with pytest.raises(sv.InvalidGateError):
        sv.Circuit(2, (sv.CNOT(1, 1),))
    with pytest.raises(sv.InvalidGateError):
        sv.apply_gate(sv.Statevector.zero(1), sv.RX(0, float("nan")))
    with pytest.raises(sv.InvalidGateError):
        sv.apply_gate(sv.Statevector.zero(2), sv.Gate("T", (0,), 0.0))


def test_dimension_mismatch():
    with pytest.raises(sv.DimensionMismatchError):
        sv.apply_circuit(sv.Statevector.zero(2), sv.Circuit(3, ()))
    with pytest.raises(sv.DimensionMismatchError):
        sv.inner_product(sv.Statevector.zero(1), sv.Statevector.zero(2))
    with pytest.raises(sv.DimensionMismatchError):
        sv.Statevector(2, np.ones(3))


def test_qubit_cap():
    with pytest.raises(ValueError):
        sv.Statevector.zero(21)


def test_inner_product_basics():
    s = sv.random_state(4, np.random.default_rng(1))
    assert abs(sv.inner_product(s, s) - 1) < 1e-12
    assert sv.inner_product(sv.Statevector.basis(1, 0), sv.Statevector.basis(1, 1)) == 0
    # conjugate-linear in the first argument
    a = sv.Statevector(1, np.array([1j, 0]))
    b = sv.Statevector(1, np.array([1, 0]))
    assert sv.inner_product(a, b) == -1j


def test_probabilities():
    np.testing.assert_array_equal(sv.probabilities(sv.Statevector.zero(1)), [1, 0])
    plus = sv.apply_gate(sv.Statevector.zero(1), sv.H(0))
    np.testing.assert_allclose(sv.probabilities(plus), [0.5, 0.5], atol=1e-15)
    rng = np.random.default_rng(2)
    c = sv.Circuit(3, _shuffled(gates_for(3), rng))
    s = sv.simulate(c)
    brute = np.abs(sv.circuit_unitary(c)[:, 0]) ** 2
    np.testing.assert_allclose(sv.probabilities(s), brute, atol=1e-12)
    assert abs(sv.probabilities(s).sum() - 1) < 1e-10


def test_sample_counts():
    assert sv.sample_counts(sv.Statevector.zero(2), 500, 0) == {0: 500}
    plus = sv.apply_gate(sv.Statevector.zero(1), sv.H(0))
    shots = 100_000
    c = sv.sample_counts(plus, shots, 7)
    assert sum(c.values()) == shots
    assert abs(c[0] / shots - 0.5) < 5 * np.sqrt(0.25 / shots)
    assert sv.sample_counts(plus, 1000, 3) == sv.sample_counts(plus, 1000, 3)
    with pytest.raises(ValueError):
        sv.sample_counts(plus, 0, 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_every_gate_matches_dense_oracle(n):
    rng = np.random.default_rng(n)
    for g in gates_for(n):
        s = sv.random_state(n, rng)
        got = sv.apply_gate(s, g).amplitudes
        want = dense_gate(g.kind, g.qubits, g.angle, n) @ s.amplitudes
        np.testing.assert_allclose(got, want, atol=1e-12, err_msg=str(g))
        np.testing.assert_allclose(sv.lift_matrix(g, n), dense_gate(g.kind, g.qubits, g.angle, n),
                                   atol=1e-12)


def test_batched_rows_match_single_application():
    rng = np.random.default_rng(5)
    n = 3
    amps = np.stack([sv.random_state(n, rng).amplitudes for _ in range(4)])
    angles = rng.uniform(-3, 3, 4)
    expect = np.stack([dense_gate("RX", (1,), a, n) @ v for a, v in zip(angles, amps)])
    sv.apply_gate_inplace(amps, "RX", (1,), angles)
    np.testing.assert_allclose(amps, expect, atol=1e-12)
    # only the selected rows move
    before = amps.copy()
    sv.apply_gate_inplace(amps, "CNOT", (0, 2), rows=[1, 3])
    np.testing.assert_array_equal(amps[[0, 2]], before[[0, 2]])


def test_simulate_batch_matches_individual_runs():
    rng = np.random.default_rng(6)
    circs = []
    for _ in range(5):
        a, b = rng.uniform(-3, 3, 2)
        circs.append(sv.Circuit(2, (sv.H(0), sv.RZ(0, a), sv.CNOT(0, 1), sv.RX(1, b))))
    batch = sv.simulate_batch(circs)
    for c, row in zip(circs, batch):
        np.testing.assert_allclose(row, sv.simulate(c).amplitudes, atol=1e-14)
    with pytest.raises(ValueError):
        sv.simulate_batch([circs[0], sv.Circuit(2, (sv.H(1),))])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), angle=ANGLES, n=st.integers(1, 5))
def test_norm_preserved_and_gates_invert(seed, angle, n):
    rng = np.random.default_rng(seed)
    s = sv.random_state(n, rng)
    for g in gates_for(n):
        g = g._replace(angle=angle) if g.kind in sv.PARAMETRIC_KINDS else g
        out = sv.apply_gate(s, g)
        assert abs(out.norm() - 1) < 1e-10
        back = sv.apply_gate(out, g.inverse())
        np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_cauchy_schwarz(seed, n):
    rng = np.random.default_rng(seed)
    a, b = sv.random_state(n, rng), sv.random_state(n, rng)
    assert abs(sv.inner_product(a, b)) <= 1 + 1e-12


def test_circuit_inverse_undoes_circuit():
    rng = np.random.default_rng(9)
    c = sv.Circuit(3, _shuffled(gates_for(3), rng))
    out = sv.simulate(c.compose(c.inverse()))
    assert abs(abs(out.amplitudes[0]) ** 2 - 1) < 1e-12


def test_values_are_immutable():
    s = sv.Statevector.zero(1)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0
