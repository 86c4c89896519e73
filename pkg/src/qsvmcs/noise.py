"""Stochastic gate noise, readout error, and readout-error mitigation.

Gate noise is unravelled into Pauli trajectories: after every gate, with
probability ``p1`` (one-qubit gates) or ``p2`` (CNOT) a uniformly random X, Y
or Z hits one of the gate's qubits. Readout error flips each reported bit
according to a per-qubit confusion matrix ``R[true, reported]``.

Mitigation follows the usual calibrate-then-invert recipe: prepare every
basis state (or, in tensored mode, each qubit's |0> and |1>), measure under
readout noise, assemble the column-stochastic response matrix
``A[measured, prepared]`` and solve ``A p = p_raw`` for a probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .statevec import (
    Circuit,
    X,
    _multinomial,
    apply_gate_inplace,
    counts_to_array,
    counts_to_dict,
    simulate,
)

_NOISE_STREAM = 0x6E6F6973
_PAULIS = ("X", "Y", "Z")
# upper bound on complex amplitudes held at once by the trajectory simulator
_MAX_BATCH_AMPLITUDES = 1 << 21


class MitigationError(ValueError):
    """Calibration matrix too ill-conditioned to invert reliably."""


def _child_seed(seed, *tags: int) -> list[int]:
    base = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    return base + list(tags)


def _confusion(flip0: float, flip1: Optional[float] = None) -> np.ndarray:
    if flip1 is None:
        flip1 = flip0
    return np.array([[1.0 - flip0, flip0], [flip1, 1.0 - flip1]])


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing-style gate noise plus per-qubit readout confusion.

    `readout` is either one 2x2 matrix shared by all qubits or a sequence of
    them indexed by qubit (rows: true 0/1, columns: reported 0/1).
    """

    p1: float = 0.0
    p2: float = 0.0
    readout: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        r = np.array(self.readout, dtype=float)
        if r.shape == (2, 2):
            r = r[None]
        if r.ndim != 3 or r.shape[1:] != (2, 2):
            raise ValueError(f"readout must be 2x2 or (n, 2, 2), got shape {r.shape}")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("readout probabilities must lie in [0, 1]")
        if not np.allclose(r.sum(axis=2), 1.0, atol=1e-12, rtol=0):
            raise ValueError("readout confusion rows must sum to 1")
        r.setflags(write=False)
        object.__setattr__(self, "readout", r)

    @classmethod
    def toronto_like(cls) -> "NoiseModel":
        """Preset with representative superconducting-device magnitudes."""
        return cls(p1=0.001, p2=0.02, readout=_confusion(0.02))

    @classmethod
    def readout_only(cls, flip: float) -> "NoiseModel":
        return cls(readout=_confusion(flip))

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and not self.has_readout_error

    @property
    def has_readout_error(self) -> bool:
        return not np.array_equal(self.readout, np.broadcast_to(np.eye(2), self.readout.shape))

    def confusion(self, qubit: int) -> np.ndarray:
        if self.readout.shape[0] == 1:
            return self.readout[0]
        return self.readout[qubit]

    def without_gate_noise(self) -> "NoiseModel":
        return NoiseModel(0.0, 0.0, self.readout)

    def to_dict(self) -> dict:
        r = self.readout
        return {
            "p1": self.p1,
            "p2": self.p2,
            "readout": (r[0] if r.shape[0] == 1 else r).tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        preset = d.get("preset")
        if preset is not None:
            if preset not in ("toronto-like", "toronto_like"):
                raise ValueError(f"unknown noise preset {preset!r}")
            base = cls.toronto_like().to_dict()
            base.update({k: v for k, v in d.items() if k != "preset"})
            if "readout_flip" in d:
                base.pop("readout")
            d = base
        readout = d.get("readout")
        if readout is None:
            readout = _confusion(float(d.get("readout_flip", 0.0)))
        return cls(float(d.get("p1", 0.0)), float(d.get("p2", 0.0)), readout)


def _apply_readout(
    counts: np.ndarray, model: NoiseModel, n_qubits: int, rng: np.random.Generator
) -> np.ndarray:
    dim = 1 << n_qubits
    outcomes = np.repeat(np.arange(dim), counts)
    for q in range(n_qubits):
        r = model.confusion(q)
        if r[0, 1] == 0 and r[1, 0] == 0:
            continue
        bit = (outcomes >> q) & 1
        p_flip = np.where(bit == 1, r[1, 0], r[0, 1])
        flips = rng.random(outcomes.size) < p_flip
        outcomes = outcomes ^ (flips.astype(outcomes.dtype) << q)
    return np.bincount(outcomes, minlength=dim)


# Monomial gates (RZ, CNOT, Paulis) act as psi'[k] = phase[k] * psi[src[k]].
# Consecutive monomial gates are fused, with cumulative prefixes kept so an
# error inside a run only splits the run instead of forcing gate-by-gate work.

_MONOMIAL = frozenset({"RZ", "CNOT", "X", "Y", "Z"})


def _monomial(kind: str, qubits, angle: float, dim: int):
    idx = np.arange(dim)
    if kind == "CNOT":
        c, t = qubits
        return idx ^ (((idx >> c) & 1) << t), np.ones(dim, dtype=complex)
    bit = (idx >> qubits[0]) & 1
    if kind == "RZ":
        return idx, np.where(bit == 1, np.exp(0.5j * angle), np.exp(-0.5j * angle))
    flipped = idx ^ (1 << qubits[0])
    if kind == "X":
        return flipped, np.ones(dim, dtype=complex)
    if kind == "Y":
        return flipped, np.where(bit == 1, 1j, -1j)
    return idx, np.where(bit == 1, -1.0 + 0j, 1.0 + 0j)


@dataclass
class _Run:
    start: int
    stop: int
    src: np.ndarray  # (m + 1, dim) cumulative gather indices, row 0 = identity
    phase: np.ndarray  # (m + 1, dim)

    def advance(self, v: np.ndarray, frm: int, to: int) -> np.ndarray:
        """Apply gates start+frm .. start+to-1 to the vector(s) `v`."""
        if frm:
            w = np.empty_like(v)
            w[..., self.src[frm]] = v / self.phase[frm]
            v = w
        return self.phase[to] * v[..., self.src[to]]


def _compile(circuit: Circuit) -> list:
    dim = 1 << circuit.n_qubits
    program: list = []
    k = 0
    gates = circuit.gates
    while k < len(gates):
        if gates[k].kind not in _MONOMIAL:
            program.append(k)
            k += 1
            continue
        start = k
        src = [np.arange(dim)]
        ph = [np.ones(dim, dtype=complex)]
        while k < len(gates) and gates[k].kind in _MONOMIAL:
            g = gates[k]
            gs, gp = _monomial(g.kind, g.qubits, g.angle, dim)
            src.append(src[-1][gs])
            ph.append(gp * ph[-1][gs])
            k += 1
        program.append(_Run(start, k, np.array(src), np.array(ph)))
    return program


def _trajectory_states(circuit: Circuit, errors: list) -> np.ndarray:
    """Final amplitudes of trajectories with Pauli insertions.

    `errors[r]` is the gate-ordered list of (gate index, qubit, pauli) for
    trajectory r.
    """
    dim = 1 << circuit.n_qubits
    amps = np.zeros((len(errors), dim), dtype=complex)
    amps[:, 0] = 1.0
    paulis = {}
    for step in _compile(circuit):
        if isinstance(step, int):
            g = circuit.gates[step]
            apply_gate_inplace(amps, g.kind, g.qubits, g.angle)
            for r, errs in enumerate(errors):
                for k, q, p in errs:
                    if k == step:
                        apply_gate_inplace(amps, p, (q,), rows=[r])
            continue
        m = step.stop - step.start
        hit = [r for r, errs in enumerate(errors)
               if any(step.start <= k < step.stop for k, _, _ in errs)]
        clean = np.setdiff1d(np.arange(len(errors)), hit)
        if clean.size:
            amps[clean] = step.advance(amps[clean], 0, m)
        for r in hit:
            v = amps[r]
            pos = 0
            for k, q, p in errors[r]:
                if not step.start <= k < step.stop:
                    continue
                to = k - step.start + 1
                v = step.advance(v, pos, to)
                if (p, q) not in paulis:
                    paulis[p, q] = _monomial(p, (q,), 0.0, dim)
                ps, pp = paulis[p, q]
                v = pp * v[ps]
                pos = to
            amps[r] = step.advance(v, pos, m)
    return amps


def noisy_counts_array(
    circuit: Circuit,
    shots: int,
    seed,
    model: NoiseModel,
    trajectories: Optional[int] = None,
) -> np.ndarray:
    """Counts array of length 2**n; see :func:`noisy_sample`."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    shots = int(shots)
    rng_out = np.random.default_rng(seed)
    rng_noise = np.random.default_rng(_child_seed(seed, _NOISE_STREAM))
    n = circuit.n_qubits
    n_traj = shots if trajectories is None else max(1, min(int(trajectories), shots))
    # shot s is measured on trajectory s % n_traj
    per_traj = np.full(n_traj, shots // n_traj, dtype=np.int64)
    per_traj[: shots % n_traj] += 1

    ideal = simulate(circuit)
    bad_rows = np.zeros(0, dtype=np.int64)
    events: list = []
    if (model.p1 > 0 or model.p2 > 0) and circuit.gates:
        rates = np.array([model.p2 if len(g.qubits) == 2 else model.p1 for g in circuit.gates])
        hit = rng_noise.random((n_traj, len(rates))) < rates
        traj_idx, gate_idx = np.nonzero(hit)
        if traj_idx.size:
            arity = np.array([len(g.qubits) for g in circuit.gates])[gate_idx]
            which = (rng_noise.random(traj_idx.size) * arity).astype(np.int64)
            pauli = rng_noise.integers(0, 3, traj_idx.size)
            bad_rows = np.unique(traj_idx)
            qubit = np.array([circuit.gates[k].qubits[w] for k, w in zip(gate_idx, which)])
            split = np.searchsorted(traj_idx, bad_rows[1:])
            for ks, qs, ps in zip(np.split(gate_idx, split), np.split(qubit, split),
                                  np.split(pauli, split)):
                events.append([(int(k), int(q), _PAULIS[p]) for k, q, p in zip(ks, qs, ps)])

    clean_shots = int(per_traj.sum() - per_traj[bad_rows].sum())
    counts = _multinomial(rng_out, clean_shots, np.abs(ideal.amplitudes) ** 2)
    if bad_rows.size:
        chunk = max(1, _MAX_BATCH_AMPLITUDES >> n)
        for start in range(0, bad_rows.size, chunk):
            rows = bad_rows[start : start + chunk]
            amps = _trajectory_states(circuit, events[start : start + chunk])
            probs = np.abs(amps) ** 2
            counts = counts + _multinomial(rng_out, per_traj[rows], probs).sum(axis=0)
    if model.has_readout_error:
        counts = _apply_readout(counts, model, n, rng_noise)
    return counts


def noisy_sample(
    circuit: Circuit,
    shots: int,
    seed,
    model: NoiseModel,
    trajectories: Optional[int] = None,
) -> dict[int, int]:
    """Measure `circuit` under `model` with Monte Carlo Pauli trajectories.

    By default every shot runs its own trajectory. Passing `trajectories`
    caps the number of distinct trajectories; shots are then spread over them
    round-robin, which keeps the estimate unbiased at lower cost. With a
    noiseless model the counts equal :func:`~qsvmcs.statevec.sample_counts`
    for the same seed.
    """
    return counts_to_dict(noisy_counts_array(circuit, shots, seed, model, trajectories))


# ---------------------------------------------------------------------------
# calibration and mitigation


@dataclass(frozen=True)
class CalibrationMatrix:
    """Measured readout response.

    full mode holds one (2**n, 2**n) matrix; tensored mode holds n 2x2
    matrices, one per qubit, each indexed ``[measured, prepared]``.
    """

    mode: str
    n_qubits: int
    matrices: tuple
    shots: int

    def full_matrix(self) -> np.ndarray:
        if self.mode == "full":
            return self.matrices[0]
        out = np.array([[1.0]])
        for m in reversed(self.matrices):
            out = np.kron(out, m)
        return out


def default_mode(n_qubits: int) -> str:
    return "tensored" if n_qubits > 4 else "full"


def _prep_circuit(n_qubits: int, index: int) -> Circuit:
    return Circuit(n_qubits, tuple(X(q) for q in range(n_qubits) if (index >> q) & 1))


def calibrate(
    n_qubits: int,
    shots: int,
    seed,
    model: NoiseModel,
    mode: Optional[str] = None,
) -> CalibrationMatrix:
    """Build the readout response matrix from prepared basis states.

    Only the model's readout error is applied during calibration.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    mode = mode or default_mode(n_qubits)
    readout = model.without_gate_noise()
    dim = 1 << n_qubits
    if mode == "full":
        a = np.empty((dim, dim))
        for b in range(dim):
            counts = noisy_counts_array(
                _prep_circuit(n_qubits, b), shots, _child_seed(seed, 0, b), readout
            )
            a[:, b] = counts / shots
        return CalibrationMatrix("full", n_qubits, (a,), int(shots))
    if mode != "tensored":
        raise ValueError(f"unknown calibration mode {mode!r}")
    idx = np.arange(dim)
    per_qubit = []
    for q in range(n_qubits):
        m = np.empty((2, 2))
        for bit in (0, 1):
            counts = noisy_counts_array(
                _prep_circuit(n_qubits, bit << q), shots, _child_seed(seed, 1, q, bit), readout
            )
            ones = counts[((idx >> q) & 1) == 1].sum() / shots
            m[:, bit] = (1.0 - ones, ones)
        per_qubit.append(m)
    return CalibrationMatrix("tensored", n_qubits, tuple(per_qubit), int(shots))


@dataclass(frozen=True)
class MitigationResult:
    probabilities: np.ndarray
    quasi_probabilities: np.ndarray


def _as_distribution(raw, n_qubits: int) -> np.ndarray:
    if isinstance(raw, Mapping):
        raw = counts_to_array(raw, n_qubits)
    v = np.asarray(raw, dtype=float)
    if v.shape != (1 << n_qubits,):
        raise ValueError(f"counts of length {v.shape} do not match {n_qubits} qubits")
    total = v.sum()
    if total <= 0:
        raise ValueError("no counts to mitigate")
    return v / total


def mitigate(raw_counts, cal: CalibrationMatrix, max_condition: float = 1e6) -> MitigationResult:
    """Undo readout error: solve ``A p = p_raw`` with p a probability vector.

    The unconstrained solution is kept as `quasi_probabilities` for
    diagnostics; `probabilities` is the nonnegative least-squares solution
    renormalized to unit sum.
    """
    p_raw = _as_distribution(raw_counts, cal.n_qubits)
    a = cal.full_matrix()
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > max_condition:
        raise MitigationError(f"calibration matrix condition number {cond:.3g} too large")
    quasi = np.linalg.solve(a, p_raw)
    if np.all(quasi >= 0):
        p = quasi
    else:
        # sum-to-one enforced through a heavily weighted extra row
        w = 1e3
        aug = np.vstack([a, w * np.ones((1, a.shape[1]))])
        rhs = np.concatenate([p_raw, [w]])
        p, _ = nnls(aug, rhs, maxiter=50 * a.shape[1])
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return MitigationResult(p, quasi)


def l1_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
