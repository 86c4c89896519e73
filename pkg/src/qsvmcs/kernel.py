"""Quantum fidelity kernels, Gram matrices and the RBF baseline.

The exact kernel is ``|<psi(xi)|psi(xj)>|**2`` from two statevectors. The
sampled kernel runs the compute-uncompute circuit U(xj) followed by U(xi)^dagger
and reports the fraction of shots that return |0...0>.

Binary kernel file layout (little endian)::

    magic   4 bytes   b"QKM1"
    rows    uint64
    cols    uint64
    shots   uint64    0 for exact kernels
    seed    int64
    taglen  uint32
    tag     taglen bytes, UTF-8 encoder tag
    data    rows * cols float64, row-major

Checkpoint files use the same header with magic ``b"QKC1"`` followed by
records ``int64 row, (rows - row) float64`` holding the upper-triangle row.
A truncated trailing record is ignored on resume.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .encoders import EncoderSpec, build
from .noise import CalibrationMatrix, NoiseModel, mitigate, noisy_counts_array
from .statevec import Circuit, _multinomial, simulate, simulate_batch

log = logging.getLogger(__name__)

MAGIC = b"QKM1"
CHECKPOINT_MAGIC = b"QKC1"
_HEADER = struct.Struct("<4sQQQqI")

_GRAM_STREAM = 0
_CROSS_STREAM = 1


class KernelEntryError(RuntimeError):
    """Failure while evaluating one kernel entry; carries its (row, col)."""

    def __init__(self, i: int, j: int, cause: Exception):
        super().__init__(f"kernel entry ({i}, {j}) failed: {cause}")
        self.i, self.j = i, j


@dataclass
class KernelMatrix:
    entries: np.ndarray
    encoder: str = ""
    shots: int = 0
    seed: int = 0

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def digest(self) -> str:
        """SHA-256 over the entries and metadata, used to pair models with kernels."""
        h = hashlib.sha256()
        h.update(_HEADER.pack(MAGIC, *self.entries.shape, self.shots, self.seed, 0))
        h.update(self.encoder.encode())
        h.update(np.ascontiguousarray(self.entries, dtype="<f8").tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# single entries


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float).reshape(-1)


def _check_pair(xi, xj) -> None:
    if _values(xi).size != _values(xj).size:
        raise ValueError(
            f"feature lengths differ: {_values(xi).size} vs {_values(xj).size}"
        )


def kernel_circuit(xi, xj, spec: EncoderSpec) -> Circuit:
    """Compute-uncompute circuit U(xj) then U(xi)^dagger."""
    _check_pair(xi, xj)
    return build(xj, spec).compose(build(xi, spec).inverse())


def kernel_exact(xi, xj, spec: EncoderSpec) -> float:
    _check_pair(xi, xj)
    a = simulate(build(xi, spec)).amplitudes
    b = simulate(build(xj, spec)).amplitudes
    return float(abs(np.vdot(a, b)) ** 2)


def _zero_fraction(
    counts: np.ndarray, shots: int, calibration: Optional[CalibrationMatrix]
) -> float:
    if calibration is None:
        return float(counts[0]) / shots
    return float(mitigate(counts, calibration).probabilities[0])


def kernel_sampled(
    xi,
    xj,
    spec: EncoderSpec,
    shots: int = 8192,
    seed=0,
    noise: Optional[NoiseModel] = None,
    calibration: Optional[CalibrationMatrix] = None,
    trajectories: Optional[int] = None,
) -> float:
    """Fraction of |0...0> outcomes of the compute-uncompute circuit.

    With `noise` the circuit is sampled through the trajectory simulator;
    with `calibration` the raw distribution is readout-mitigated first and
    the mitigated |0...0> probability is returned.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    circ = kernel_circuit(xi, xj, spec)
    if noise is None:
        rng = np.random.default_rng(seed)
        counts = _multinomial(rng, int(shots), np.abs(simulate(circ).amplitudes) ** 2)
    else:
        counts = noisy_counts_array(circ, shots, seed, noise, trajectories)
    return _zero_fraction(counts, shots, calibration)


def encode_states(X: Sequence, spec: EncoderSpec, chunk: int = 256) -> np.ndarray:
    """Encoded statevectors, shape (len(X), 2**n), simulated in batches."""
    circuits = [build(x, spec) for x in X]
    out = [simulate_batch(circuits[s : s + chunk]) for s in range(0, len(circuits), chunk)]
    return np.concatenate(out, axis=0)


def _fidelities(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a.conj() @ b.T) ** 2


# ---------------------------------------------------------------------------
# matrices


@dataclass
class _Job:
    """Everything needed to evaluate one row, picklable for worker processes."""

    rows: list
    cols: list
    spec: EncoderSpec
    shots: int
    seed: int
    stream: int
    noise: Optional[NoiseModel]
    calibration: Optional[CalibrationMatrix]
    trajectories: Optional[int]
    symmetric: bool


def _sampled_row(job: _Job, i: int) -> np.ndarray:
    start = i if job.symmetric else 0
    xi = job.rows[i]
    cols = job.cols[start:]
    out = np.empty(len(cols))
    if job.noise is None:
        # all circuits in a row share one structure: simulate them as a batch
        circs = []
        for xj in cols:
            _check_pair(xi, xj)
            circs.append(build(xj, job.spec).compose(build(xi, job.spec).inverse()))
        probs = np.abs(simulate_batch(circs)) ** 2
        for k in range(len(cols)):
            rng = np.random.default_rng([job.seed, job.stream, i, start + k])
            counts = _multinomial(rng, job.shots, probs[k])
            out[k] = _zero_fraction(counts, job.shots, job.calibration)
        return out
    for k, xj in enumerate(cols):
        j = start + k
        try:
            out[k] = kernel_sampled(
                xi, xj, job.spec, job.shots, [job.seed, job.stream, i, j],
                job.noise, job.calibration, job.trajectories,
            )
        except Exception as exc:
            raise KernelEntryError(i, j, exc) from exc
    return out


def _run_row(args):
    job, i = args
    return i, _sampled_row(job, i)


def _read_checkpoint(path, n: int, header: bytes) -> dict[int, np.ndarray]:
    rows: dict[int, np.ndarray] = {}
    if not os.path.exists(path):
        return rows
    with open(path, "rb") as fh:
        head = fh.read(len(header))
        if head != header:
            raise ValueError(f"checkpoint {path} belongs to a different computation")
        while True:
            raw = fh.read(8)
            if len(raw) < 8:
                break
            (i,) = struct.unpack("<q", raw)
            size = (n - i) * 8
            payload = fh.read(size)
            if len(payload) < size:
                break
            rows[i] = np.frombuffer(payload, dtype="<f8").copy()
    return rows


def _header(magic: bytes, rows: int, cols: int, shots: int, seed: int, tag: str) -> bytes:
    t = tag.encode()
    return _HEADER.pack(magic, rows, cols, shots, seed, len(t)) + t


def gram_matrix(
    X: Sequence,
    spec: EncoderSpec,
    shots: int = 0,
    seed: int = 0,
    noise: Optional[NoiseModel] = None,
    calibration: Optional[CalibrationMatrix] = None,
    trajectories: Optional[int] = None,
    checkpoint: Optional[str] = None,
    workers: int = 1,
) -> KernelMatrix:
    """Symmetric kernel matrix over `X`.

    ``shots=0`` selects the exact statevector path (diagonal fixed to 1).
    Otherwise every unordered pair, diagonal included, is sampled once with a
    seed derived from ``(seed, i, j)``, so results do not depend on `workers`
    or on resuming from `checkpoint`.
    """
    n = len(X)
    if n == 0:
        raise ValueError("empty dataset")
    for x in X[1:]:
        _check_pair(X[0], x)
    if shots == 0:
        if noise is not None:
            raise ValueError("noise requires shots > 0")
        s = encode_states(X, spec)
        k = _fidelities(s, s)
        k = np.triu(k, 1)
        k = k + k.T
        np.fill_diagonal(k, 1.0)
        return KernelMatrix(k, spec.tag, 0, seed)

    job = _Job(list(X), list(X), spec, int(shots), int(seed), _GRAM_STREAM,
               noise, calibration, trajectories, True)
    header = _header(CHECKPOINT_MAGIC, n, n, shots, seed, spec.tag)
    done = _read_checkpoint(checkpoint, n, header) if checkpoint else {}
    if done:
        log.info("resuming gram matrix: %d of %d rows from %s", len(done), n, checkpoint)
    fh = None
    if checkpoint:
        fresh = not os.path.exists(checkpoint) or not done
        fh = open(checkpoint, "wb" if fresh else "r+b")
        if fresh:
            fh.write(header)
        else:
            # drop any truncated tail before appending
            fh.seek(len(header) + sum(8 + 8 * (n - i) for i in done))
            fh.truncate()
    todo = [i for i in range(n) if i not in done]
    try:
        for i, row in _map_rows(job, todo, workers):
            done[i] = row
            if fh is not None:
                fh.write(struct.pack("<q", i))
                fh.write(np.ascontiguousarray(row, dtype="<f8").tobytes())
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    k = np.empty((n, n))
    for i in range(n):
        k[i, i:] = done[i]
        k[i:, i] = done[i]
    return KernelMatrix(k, spec.tag, int(shots), int(seed))


def _map_rows(job: _Job, rows: list[int], workers: int):
    if workers <= 1 or len(rows) <= 1:
        for i in rows:
            yield i, _sampled_row(job, i)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so placement is by index regardless
        yield from pool.map(_run_row, [(job, i) for i in rows])


def cross_gram(
    X_test: Sequence,
    X_train: Sequence,
    spec: EncoderSpec,
    shots: int = 0,
    seed: int = 0,
    noise: Optional[NoiseModel] = None,
    calibration: Optional[CalibrationMatrix] = None,
    trajectories: Optional[int] = None,
    workers: int = 1,
) -> KernelMatrix:
    """Rectangular kernel, entry [t, r] between test point t and training point r."""
    if len(X_test) == 0 or len(X_train) == 0:
        raise ValueError("empty dataset")
    for x in list(X_test) + list(X_train):
        _check_pair(X_train[0], x)
    if shots == 0:
        if noise is not None:
            raise ValueError("noise requires shots > 0")
        k = _fidelities(encode_states(X_test, spec), encode_states(X_train, spec))
        return KernelMatrix(k, spec.tag, 0, seed)
    job = _Job(list(X_test), list(X_train), spec, int(shots), int(seed), _CROSS_STREAM,
               noise, calibration, trajectories, False)
    k = np.empty((len(X_test), len(X_train)))
    for t, row in _map_rows(job, list(range(len(X_test))), workers):
        k[t] = row
    return KernelMatrix(k, spec.tag, int(shots), int(seed))


# ---------------------------------------------------------------------------
# classical baseline


def rbf_kernel(xi, xj, sigma: float) -> float:
    """exp(-|xi - xj|^2 / (2 sigma^2))."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = _values(xi) - _values(xj)
    return float(np.exp(-(d @ d) / (2.0 * sigma**2)))


def rbf_gram(A: Sequence, B: Sequence, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    a = np.array([_values(x) for x in A])
    b = np.array([_values(x) for x in B])
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * sigma**2))


# ---------------------------------------------------------------------------
# conditioning


def regularize_psd(k: np.ndarray, method: str = "shift", margin: float = 1e-8) -> np.ndarray:
    """Make a symmetric kernel positive semidefinite.

    ``shift`` adds lambda*I with lambda = max(0, margin - lambda_min);
    ``clip`` zeroes negative eigenvalues.
    """
    k = 0.5 * (k + k.T)
    w, v = np.linalg.eigh(k)
    if method == "shift":
        lam = max(0.0, margin - w[0])
        return k + lam * np.eye(k.shape[0])
    if method == "clip":
        return (v * np.maximum(w, 0.0)) @ v.T
    raise ValueError(f"unknown regularization {method!r}")


# ---------------------------------------------------------------------------
# files


def write_kernel(path, km: KernelMatrix) -> None:
    rows, cols = km.entries.shape
    with open(path, "wb") as fh:
        fh.write(_header(MAGIC, rows, cols, km.shots, km.seed, km.encoder))
        fh.write(np.ascontiguousarray(km.entries, dtype="<f8").tobytes())


def read_kernel(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated kernel header")
        magic, rows, cols, shots, seed, taglen = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a kernel file (magic {magic!r})")
        tag = fh.read(taglen).decode()
        payload = fh.read()
    if len(payload) != rows * cols * 8:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {len(payload) // 8}")
    data = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()
    return KernelMatrix(data, tag, shots, seed)


def write_kernel_csv(path, km: KernelMatrix) -> None:
    np.savetxt(path, km.entries, delimiter=",", fmt="%.17g")
