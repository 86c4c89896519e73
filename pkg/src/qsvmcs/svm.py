"""Soft-margin SVM on a precomputed kernel, trained by SMO.

Dual problem::

    min_a  1/2 a^T Q a - e^T a     Q_ij = y_i y_j K_ij
    s.t.   y^T a = 0,  0 <= a_i <= C

Working pairs are chosen by the maximal-violating-pair rule, so training is
deterministic. The two-variable update follows the standard analytic step
with clipping to the box; a non-positive curvature along the pair (possible
for shot-noise kernels) is replaced by a small constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernel import KernelMatrix, regularize_psd

_TAU = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tolerance: float = 1e-6
    max_iter: int = 1_000_000
    # applied to the kernel and retried when SMO does not converge
    regularization: Optional[str] = "shift"

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be positive, got {self.max_iter}")


@dataclass
class SvmModel:
    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    C: float
    tolerance: float = 1e-6
    kernel_hash: str = ""
    converged: bool = True
    n_iter: int = 0
    diagonal_shift: float = 0.0
    objective_history: list = field(default_factory=list, repr=False)

    @property
    def dual_coef(self) -> np.ndarray:
        return self.alphas * self.labels

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)

    @property
    def n_train(self) -> int:
        return self.alphas.shape[0]


def dual_objective(alphas: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    ay = alphas * y
    return float(0.5 * ay @ K @ ay - alphas.sum())


def _as_array(K) -> np.ndarray:
    return np.asarray(getattr(K, "entries", K), dtype=float)


def _validate(K: np.ndarray, y: np.ndarray) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel must be square, got shape {K.shape}")
    if K.shape[0] != y.shape[0]:
        raise ValueError(f"kernel has {K.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise ValueError("training labels contain a single class")
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel contains non-finite entries")


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """Return (alphas, gradient, converged, iterations, objective history)."""
    n = y.shape[0]
    Q = (y[:, None] * y[None, :]) * K
    qd = np.diag(Q).copy()
    a = np.zeros(n)
    G = -np.ones(n)
    history = [0.0]
    pos = y > 0
    converged = False
    it = 0
    while it < max_iter:
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        score = -y * G
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        if s_up[i] - s_low[j] < tol:
            converged = True
            break
        it += 1
        ai, aj = a[i], a[j]
        qij = Q[i, j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
                if nj > C:
                    nj, ni = C, total - C
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        a[i], a[j] = ni, nj
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)
        history.append(float(0.5 * a @ (G - 1.0)))
    return a, G, converged, it, history


def _bias(a: np.ndarray, G: np.ndarray, y: np.ndarray, C: float) -> float:
    yG = y * G
    free = (a > 0) & (a < C)
    if free.any():
        return float(-yG[free].mean())
    at_upper = a >= C
    at_lower = a <= 0
    # bounds on rho = -b from the KKT conditions of the bound variables
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float(-(ub + lb) / 2.0)


def train(K, y, cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Fit dual coefficients and bias on a training kernel.

    When SMO hits `max_iter` and `cfg.regularization` is set, the kernel is
    made positive semidefinite (diagonal shift by default) and training is
    repeated; the applied shift is recorded on the model.
    """
    Km = _as_array(K)
    y = np.asarray(y, dtype=float).reshape(-1)
    _validate(Km, y)
    a, G, ok, it, hist = smo(Km, y, cfg.C, cfg.tolerance, cfg.max_iter)
    shift = 0.0
    if not ok and cfg.regularization:
        K2 = regularize_psd(Km, cfg.regularization)
        shift = float(np.mean(np.diag(K2) - np.diag(Km)))
        a, G, ok, it2, hist = smo(K2, y, cfg.C, cfg.tolerance, cfg.max_iter)
        it += it2
    digest = K.digest() if isinstance(K, KernelMatrix) else ""
    return SvmModel(
        alphas=a,
        labels=y.astype(int),
        bias=_bias(a, G, y, cfg.C),
        C=cfg.C,
        tolerance=cfg.tolerance,
        kernel_hash=digest,
        converged=ok,
        n_iter=it,
        diagonal_shift=shift,
        objective_history=hist,
    )


def decision_function(model: SvmModel, K_cross) -> np.ndarray:
    """Raw scores sum_i a_i y_i K(x_i, x) + b, one per row of `K_cross`."""
    Kc = _as_array(K_cross)
    if Kc.ndim != 2 or Kc.shape[1] != model.n_train:
        raise ValueError(
            f"cross kernel shape {Kc.shape} does not match {model.n_train} training points"
        )
    return Kc @ model.dual_coef + model.bias


def squash(scores: np.ndarray) -> np.ndarray:
    """Logistic map of raw scores onto (0, 1); order preserving."""
    return 1.0 / (1.0 + np.exp(-np.asarray(scores, dtype=float)))


def predict(model: SvmModel, K_cross) -> tuple[np.ndarray, np.ndarray]:
    """Class labels (1 signal, 0 background; ties go to signal) and squashed scores."""
    s = decision_function(model, K_cross)
    return (s >= 0).astype(int), squash(s)


# ---------------------------------------------------------------------------
# model files


def write_model(path, model: SvmModel) -> None:
    sv = model.support_indices
    lines = [
        "# qsvmcs-model v1",
        f"C {float(model.C)!r}",
        f"tolerance {float(model.tolerance)!r}",
        f"bias {float(model.bias)!r}",
        f"kernel_hash {model.kernel_hash or '-'}",
        f"n_train {model.n_train}",
        f"converged {int(model.converged)}",
        f"diagonal_shift {float(model.diagonal_shift)!r}",
        "labels " + "".join("+" if v > 0 else "-" for v in model.labels),
        f"n_support {sv.size}",
    ]
    coef = model.dual_coef
    lines += [f"{i} {float(coef[i])!r}" for i in sv]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path) -> SvmModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("# qsvmcs-model"):
        raise ValueError(f"{path}: not a model file")
    meta = {}
    k = 1
    while k < len(lines):
        key, _, val = lines[k].partition(" ")
        meta[key] = val
        k += 1
        if key == "n_support":
            break
    n = int(meta["n_train"])
    labels = np.array([1 if c == "+" else -1 for c in meta["labels"]], dtype=int)
    alphas = np.zeros(n)
    for ln in lines[k : k + int(meta["n_support"])]:
        i, c = ln.split()
        alphas[int(i)] = abs(float(c))
    return SvmModel(
        alphas=alphas,
        labels=labels,
        bias=float(meta["bias"]),
        C=float(meta["C"]),
        tolerance=float(meta["tolerance"]),
        kernel_hash="" if meta["kernel_hash"] == "-" else meta["kernel_hash"],
        converged=bool(int(meta["converged"])),
        diagonal_shift=float(meta["diagonal_shift"]),
    )
