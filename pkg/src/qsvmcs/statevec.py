"""Dense statevector simulation for the small gate set used by the encoders.

Qubit 0 is the least-significant bit of the basis index, so the basis state
``|q_{n-1} ... q_1 q_0>`` has index ``sum(q_k << k)``.

Conventions::

    H      = [[1, 1], [1, -1]] / sqrt(2)
    RX(a)  = exp(-i a X / 2)
    RZ(a)  = diag(exp(-i a / 2), exp(+i a / 2))
    CNOT   flips the target bit when the control bit is 1

X, Y and Z are also accepted; they are used for error insertion and for
basis-state preparation during readout calibration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from numba import njit

MAX_QUBITS = 20

SINGLE_QUBIT_KINDS = frozenset({"H", "RX", "RZ", "X", "Y", "Z"})
TWO_QUBIT_KINDS = frozenset({"CNOT"})
PARAMETRIC_KINDS = frozenset({"RX", "RZ"})

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class InvalidGateError(ValueError):
    """Gate that cannot act on the given register."""


class DimensionMismatchError(ValueError):
    """Operands live on registers of different sizes."""


class Gate(NamedTuple):
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def inverse(self) -> "Gate":
        if self.kind in PARAMETRIC_KINDS:
            return Gate(self.kind, self.qubits, -self.angle)
        # H, CNOT and the Paulis are self-inverse
        return self


def H(q: int) -> Gate:
    return Gate("H", (q,))


def RX(q: int, angle: float) -> Gate:
    return Gate("RX", (q,), float(angle))


def RZ(q: int, angle: float) -> Gate:
    return Gate("RZ", (q,), float(angle))


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def X(q: int) -> Gate:
    return Gate("X", (q,))


def Y(q: int) -> Gate:
    return Gate("Y", (q,))


def Z(q: int) -> Gate:
    return Gate("Z", (q,))


def check_gate(gate: Gate, n_qubits: int) -> None:
    """Raise :class:`InvalidGateError` unless `gate` can act on `n_qubits` qubits."""
    if gate.kind in SINGLE_QUBIT_KINDS:
        arity = 1
    elif gate.kind in TWO_QUBIT_KINDS:
        arity = 2
    else:
        raise InvalidGateError(f"unknown gate kind {gate.kind!r}")
    if len(gate.qubits) != arity:
        raise InvalidGateError(f"{gate.kind} takes {arity} qubit(s), got {gate.qubits}")
    for q in gate.qubits:
        if not 0 <= q < n_qubits:
            raise InvalidGateError(
                f"qubit index {q} out of range for {n_qubits}-qubit register"
            )
    if arity == 2 and gate.qubits[0] == gate.qubits[1]:
        raise InvalidGateError("CNOT control and target must differ")
    if not np.isfinite(gate.angle):
        raise InvalidGateError(f"non-finite angle in {gate}")


def _check_n_qubits(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate program on a fixed register."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        gates = tuple(Gate(g.kind, tuple(g.qubits), float(g.angle)) for g in self.gates)
        for g in gates:
            check_gate(g, self.n_qubits)
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def inverse(self) -> "Circuit":
        """Adjoint circuit: reversed gate order, parametric angles negated."""
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def compose(self, other: "Circuit") -> "Circuit":
        """Circuit running `self` first, then `other`."""
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatchError(
                f"cannot compose {self.n_qubits}- and {other.n_qubits}-qubit circuits"
            )
        return Circuit(self.n_qubits, self.gates + other.gates)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    @property
    def structure(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        """Gate kinds and wires without angles; equal for all inputs of one encoder."""
        return tuple((g.kind, g.qubits) for g in self.gates)

    @property
    def angles(self) -> np.ndarray:
        return np.array([g.angle for g in self.gates], dtype=float)


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionMismatchError(
                f"{amps.shape[0]} amplitudes do not fit {self.n_qubits} qubits"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        _check_n_qubits(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "Statevector":
        _check_n_qubits(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


# ---------------------------------------------------------------------------
# array kernels
#
# Kernels act in place on a batch of states shaped (B, 2**n), optionally on a
# subset of rows. One-qubit gates take either a single 2x2 matrix or one per
# row, so one call advances many circuits that share a gate structure but
# differ in their parameters.


@njit(cache=True)
def _kernel_1q(amps, rows, q, mats):
    step = 1 << q
    dim = amps.shape[1]
    per_row = mats.shape[0] > 1
    for r in range(rows.shape[0]):
        b = rows[r]
        m = mats[r] if per_row else mats[0]
        m00, m01, m10, m11 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        for base in range(0, dim, 2 * step):
            for k in range(base, base + step):
                a0 = amps[b, k]
                a1 = amps[b, k + step]
                amps[b, k] = m00 * a0 + m01 * a1
                amps[b, k + step] = m10 * a0 + m11 * a1


@njit(cache=True)
def _kernel_cnot(amps, rows, control, target):
    dim = amps.shape[1]
    cbit = 1 << control
    tbit = 1 << target
    for r in range(rows.shape[0]):
        b = rows[r]
        for k in range(dim):
            if (k & cbit) and not (k & tbit):
                tmp = amps[b, k]
                amps[b, k] = amps[b, k | tbit]
                amps[b, k | tbit] = tmp


_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _matrices(kind: str, angle) -> np.ndarray:
    """(m, 2, 2) stack of one-qubit matrices; m is 1 or the batch size."""
    if kind in _FIXED:
        return _FIXED[kind][None]
    a = np.atleast_1d(np.asarray(angle, dtype=float)) * 0.5
    out = np.zeros((a.size, 2, 2), dtype=complex)
    if kind == "RZ":
        out[:, 0, 0] = np.exp(-1j * a)
        out[:, 1, 1] = np.exp(1j * a)
    elif kind == "RX":
        c, s = np.cos(a), -1j * np.sin(a)
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        out[:, 0, 1] = s
        out[:, 1, 0] = s
    else:
        raise InvalidGateError(f"unknown gate kind {kind!r}")
    return out


def apply_gate_inplace(
    amps: np.ndarray, kind: str, qubits: Sequence[int], angle=0.0, rows=None
) -> None:
    """Apply a gate to rows of a (B, 2**n) complex array in place.

    `angle` is a scalar or one angle per selected row; `rows` defaults to all.
    """
    if rows is None:
        rows = np.arange(amps.shape[0])
    rows = np.asarray(rows, dtype=np.int64)
    if kind == "CNOT":
        _kernel_cnot(amps, rows, int(qubits[0]), int(qubits[1]))
        return
    mats = _matrices(kind, angle)
    if mats.shape[0] not in (1, rows.shape[0]):
        raise DimensionMismatchError(
            f"{mats.shape[0]} angles for {rows.shape[0]} states"
        )
    _kernel_1q(amps, rows, int(qubits[0]), mats)


def apply_gate_array(
    amps: np.ndarray, kind: str, qubits: Sequence[int], angle=0.0
) -> np.ndarray:
    """Return a new (B, 2**n) array with the gate applied to every row."""
    out = np.array(amps, dtype=complex, order="C", copy=True)
    apply_gate_inplace(out, kind, qubits, angle)
    return out


def gate_matrix(gate: Gate) -> np.ndarray:
    """2x2 or 4x4 unitary of `gate` on its own wires.

    For CNOT the 4x4 matrix is in the basis index ``2*target_bit + control_bit``
    (control is the less significant wire), matching the register convention.
    """
    if gate.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
    if gate.kind == "RX":
        c, s = np.cos(gate.angle / 2), np.sin(gate.angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if gate.kind == "RZ":
        return np.diag([np.exp(-0.5j * gate.angle), np.exp(0.5j * gate.angle)])
    if gate.kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if gate.kind == "Y":
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if gate.kind == "Z":
        return np.diag([1.0, -1.0]).astype(complex)
    if gate.kind == "CNOT":
        m = np.zeros((4, 4), dtype=complex)
        for k in range(4):
            c, t = k & 1, k >> 1
            m[(t ^ c) << 1 | c, k] = 1.0
        return m
    raise InvalidGateError(f"unknown gate kind {gate.kind!r}")


# ---------------------------------------------------------------------------
# public operations


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    check_gate(gate, state.n_qubits)
    out = apply_gate_array(state.amplitudes[None, :], gate.kind, gate.qubits, gate.angle)
    return Statevector(state.n_qubits, out[0])


def apply_circuit(state: Statevector, circuit: Circuit) -> Statevector:
    if circuit.n_qubits != state.n_qubits:
        raise DimensionMismatchError(
            f"{circuit.n_qubits}-qubit circuit applied to {state.n_qubits}-qubit state"
        )
    amps = np.array(state.amplitudes[None, :])
    for g in circuit.gates:
        apply_gate_inplace(amps, g.kind, g.qubits, g.angle)
    return Statevector(state.n_qubits, amps[0])


def simulate(circuit: Circuit) -> Statevector:
    """State produced by `circuit` acting on |0...0>."""
    return apply_circuit(Statevector.zero(circuit.n_qubits), circuit)


def simulate_batch(circuits: Sequence[Circuit]) -> np.ndarray:
    """Final amplitudes, shape (len(circuits), 2**n), for circuits sharing one structure.

    All circuits start from |0...0>. The batch is advanced one gate at a time with
    per-row angles, which is much faster than simulating the circuits separately.
    """
    if not circuits:
        raise ValueError("empty circuit batch")
    first = circuits[0]
    structure = first.structure
    for c in circuits[1:]:
        if c.n_qubits != first.n_qubits or c.structure != structure:
            raise ValueError("batched circuits must share gate kinds and wires")
    angles = np.stack([c.angles for c in circuits], axis=1) if first.gates else None
    amps = np.zeros((len(circuits), 1 << first.n_qubits), dtype=complex)
    amps[:, 0] = 1.0
    rows = np.arange(len(circuits))
    for k, (kind, qubits) in enumerate(structure):
        angle = angles[k] if kind in PARAMETRIC_KINDS else 0.0
        apply_gate_inplace(amps, kind, qubits, angle, rows)
    return amps


def inner_product(a: Statevector, b: Statevector) -> complex:
    """<a|b>, conjugate-linear in `a`."""
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(f"{a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def probabilities(state: Statevector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def _multinomial(rng: np.random.Generator, shots, probs: np.ndarray) -> np.ndarray:
    # guard against round-off pushing the total a hair above one
    p = np.clip(probs, 0.0, None)
    p = p / p.sum(axis=-1, keepdims=True)
    return rng.multinomial(shots, p)


def sample_counts(state: Statevector, shots: int, seed) -> dict[int, int]:
    """Draw `shots` measurements in the computational basis.

    `seed` is anything :func:`numpy.random.default_rng` accepts; a fixed seed
    gives bit-identical counts. Only outcomes that occurred are returned.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    counts = _multinomial(rng, int(shots), probabilities(state))
    return counts_to_dict(counts)


def counts_to_dict(counts: np.ndarray) -> dict[int, int]:
    nz = np.flatnonzero(counts)
    return {int(k): int(counts[k]) for k in nz}


def counts_to_array(counts: Mapping[int, int], n_qubits: int) -> np.ndarray:
    out = np.zeros(1 << n_qubits, dtype=np.int64)
    for k, c in counts.items():
        out[k] += c
    return out


def random_state(n_qubits: int, rng: np.random.Generator) -> Statevector:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return Statevector(n_qubits, v / np.linalg.norm(v))


def lift_matrix(gate: Gate, n_qubits: int) -> np.ndarray:
    """Full 2**n x 2**n matrix of `gate` built from Kronecker products.

    Independent of :func:`apply_gate_array`; used as a reference for checking it.
    """
    check_gate(gate, n_qubits)
    eye = np.eye(2, dtype=complex)
    if gate.kind != "CNOT":
        (q,) = gate.qubits
        ops = [gate_matrix(gate) if k == q else eye for k in range(n_qubits)]
        out = np.array([[1.0 + 0j]])
        # qubit n-1 is the most significant factor
        for op in reversed(ops):
            out = np.kron(out, op)
        return out
    control, target = gate.qubits
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    x = gate_matrix(X(0))
    left = [p0 if k == control else eye for k in range(n_qubits)]
    right = [p1 if k == control else (x if k == target else eye) for k in range(n_qubits)]
    out_l = np.array([[1.0 + 0j]])
    out_r = np.array([[1.0 + 0j]])
    for a, b in zip(reversed(left), reversed(right)):
        out_l = np.kron(out_l, a)
        out_r = np.kron(out_r, b)
    return out_l + out_r


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    u = np.eye(1 << circuit.n_qubits, dtype=complex)
    for g in circuit.gates:
        u = lift_matrix(g, circuit.n_qubits) @ u
    return u
