"""Feature-map circuits for the four encoding strategies.

Every builder takes a flat feature vector ``[p~, theta, phi] * k`` (see
:mod:`qsvmcs.preprocess`) and a layer count L, and returns the encoding
circuit U(x) acting on |0...0>.

Qubit layouts
-------------
combinatorial
    one qubit per feature, ``3 * k`` qubits, feature order preserved.
bloch
    one qubit per particle: RX(theta) then RZ(p~); phi unused.
separate_particle
    two qubits per particle: qubit ``2i`` is the angle qubit, qubit ``2i + 1``
    the momentum qubit. After the H layer: RZ(2*theta) on the angle qubit,
    RZ(2*p~) on the momentum qubit, ZZ(f2(p~, theta)); then H, RZ(2*phi) on
    the angle qubit and ZZ(f2(p~, phi)).
separate_particle_bloch
    two qubits per particle: qubit ``2i`` is the angle qubit (RX(theta),
    RZ(phi), no Hadamard), qubit ``2i + 1`` the momentum qubit (H, RZ(p~)).

Phase convention: RZ(a) = diag(exp(-ia/2), exp(ia/2)), so a feature x enters
as RZ(2x) = exp(-i x Z) and zz_block(l, m, f) = CNOT, RZ(2f), CNOT equals
exp(-i f Z_l Z_m). For circuits made of H, RZ and CNOT only, reversing every
phase sign conjugates the state and leaves kernels unchanged; with RX present
the sign is a fixed convention of this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .statevec import CNOT, RX, RZ, Circuit, Gate, H

STRATEGIES = (
    "combinatorial",
    "bloch",
    "separate_particle",
    "separate_particle_bloch",
)

_ALIASES = {
    "combinatorial": "combinatorial",
    "bloch": "bloch",
    "blochsphere": "bloch",
    "bloch_sphere": "bloch",
    "separate_particle": "separate_particle",
    "separateparticle": "separate_particle",
    "separate_particle_bloch": "separate_particle_bloch",
    "separateparticlebloch": "separate_particle_bloch",
}


@dataclass(frozen=True)
class EncoderSpec:
    strategy: str = "separate_particle_bloch"
    layers: int = 2
    intra_particle_entangle: bool = True

    def __post_init__(self):
        key = self.strategy.lower().replace("-", "_")
        if key not in _ALIASES:
            raise ValueError(f"unknown encoding strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", _ALIASES[key])
        if int(self.layers) < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        object.__setattr__(self, "layers", int(self.layers))

    @property
    def tag(self) -> str:
        """Short identifier stored alongside kernels and models."""
        t = f"{self.strategy}:L{self.layers}"
        if self.strategy == "separate_particle_bloch":
            t += ":intra" if self.intra_particle_entangle else ":nointra"
        return t

    def build(self, x) -> Circuit:
        return build(x, self)

    def n_qubits(self, n_features: int) -> int:
        return n_qubits(self.strategy, n_features)


def n_qubits(strategy: str, n_features: int) -> int:
    if strategy == "combinatorial":
        return n_features
    if n_features % 3:
        raise ValueError(f"{n_features} features is not a whole number of particles")
    k = n_features // 3
    return k if strategy == "bloch" else 2 * k


def entangler_f2(xl: float, xm: float) -> float:
    """Pairwise phase (xl - pi)(xm - pi) / pi."""
    return (xl - np.pi) * (xm - np.pi) / np.pi


def entangler_f3(p: float, theta: float, phi: float) -> float:
    """Three-variable phase (pi - p)(pi - theta)(pi - phi) / pi**2."""
    return (np.pi - p) * (np.pi - theta) * (np.pi - phi) / np.pi**2


def zz_block(ql: int, qm: int, angle: float) -> list[Gate]:
    """CNOT, RZ(2*angle), CNOT: a ZZ phase between two qubits.

    Equal to exp(-i * angle * Z_l Z_m) exactly; reversing the sign of `angle`
    gives the exp(+i ...) form.
    """
    if ql == qm:
        raise ValueError("zz_block needs two distinct qubits")
    return [CNOT(ql, qm), RZ(qm, 2.0 * angle), CNOT(ql, qm)]


def _features(x) -> np.ndarray:
    v = np.asarray(getattr(x, "values", x), dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("empty feature vector")
    return v


def _particles(x) -> np.ndarray:
    v = _features(x)
    if v.size % 3:
        raise ValueError(f"feature count {v.size} is not divisible by 3")
    return v.reshape(-1, 3)


def build_combinatorial(x, layers: int = 2) -> Circuit:
    """Every qubit entangled with every other: H layer, RZ(2 x_k), ZZ(f2) for all pairs."""
    v = _features(x)
    n = v.size
    gates: list[Gate] = []
    for _ in range(layers):
        gates.extend(H(k) for k in range(n))
        gates.extend(RZ(k, 2.0 * v[k]) for k in range(n))
        for l, m in combinations(range(n), 2):
            gates.extend(zz_block(l, m, entangler_f2(v[l], v[m])))
    return Circuit(n, tuple(gates))


def build_bloch(x, layers: int = 2) -> Circuit:
    """One unentangled qubit per particle: RX(theta) then RZ(p~)."""
    parts = _particles(x)
    gates: list[Gate] = []
    for _ in range(layers):
        for i, (p, theta, _phi) in enumerate(parts):
            gates.append(RX(i, theta))
            gates.append(RZ(i, p))
    return Circuit(len(parts), tuple(gates))


def _inter_particle(gates: list[Gate], parts: np.ndarray) -> None:
    for i, j in combinations(range(len(parts)), 2):
        gates.extend(zz_block(2 * i + 1, 2 * j + 1, entangler_f2(parts[i, 0], parts[j, 0])))


def build_separate_particle(x, layers: int = 2) -> Circuit:
    """Entangled two-qubit block per particle, then momentum-qubit ZZ between all particle pairs."""
    parts = _particles(x)
    n = 2 * len(parts)
    gates: list[Gate] = []
    for _ in range(layers):
        gates.extend(H(k) for k in range(n))
        for i, (p, theta, phi) in enumerate(parts):
            a, m = 2 * i, 2 * i + 1
            gates.append(RZ(a, 2.0 * theta))
            gates.append(RZ(m, 2.0 * p))
            gates.extend(zz_block(m, a, entangler_f2(p, theta)))
            # second basis change keeps phi from merging with theta into one Z phase
            gates.append(H(a))
            gates.append(RZ(a, 2.0 * phi))
            gates.extend(zz_block(m, a, entangler_f2(p, phi)))
        _inter_particle(gates, parts)
    return Circuit(n, tuple(gates))


def build_separate_particle_bloch(x, layers: int = 2, intra: bool = True) -> Circuit:
    """Angle qubit RX(theta), RZ(phi); momentum qubit H, RZ(p~); optional ZZ(f3) inside."""
    parts = _particles(x)
    n = 2 * len(parts)
    gates: list[Gate] = []
    for _ in range(layers):
        for i, (p, theta, phi) in enumerate(parts):
            a, m = 2 * i, 2 * i + 1
            gates.append(RX(a, theta))
            gates.append(RZ(a, phi))
            gates.append(H(m))
            gates.append(RZ(m, p))
            if intra:
                gates.extend(zz_block(m, a, entangler_f3(p, theta, phi)))
        _inter_particle(gates, parts)
    return Circuit(n, tuple(gates))


def build(x, spec: EncoderSpec) -> Circuit:
    if spec.strategy == "combinatorial":
        return build_combinatorial(x, spec.layers)
    if spec.strategy == "bloch":
        return build_bloch(x, spec.layers)
    if spec.strategy == "separate_particle":
        return build_separate_particle(x, spec.layers)
    return build_separate_particle_bloch(x, spec.layers, spec.intra_particle_entangle)


def build_many(X: Sequence, spec: EncoderSpec) -> list[Circuit]:
    return [build(x, spec) for x in X]
