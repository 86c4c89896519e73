"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerics; gate matrices come from
matrix exponentials, the QP from cvxopt, thrust from brute-force search.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
HAD = (PX + PZ) / np.sqrt(2)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


def one_qubit(kind: str, angle: float = 0.0) -> np.ndarray:
    if kind == "H":
        return HAD
    if kind == "RX":
        return expm(-0.5j * angle * PX)
    if kind == "RZ":
        return expm(-0.5j * angle * PZ)
    return {"X": PX, "Y": PY, "Z": PZ}[kind]


def embed(ops: dict, n: int) -> np.ndarray:
    """Kronecker product with ``ops[q]`` on qubit q (identity elsewhere).

    Qubit 0 is the least significant bit, i.e. the rightmost factor.
    """
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense_gate(kind: str, qubits, angle: float, n: int) -> np.ndarray:
    if kind == "CNOT":
        c, t = qubits
        return embed({c: P0}, n) + embed({c: P1, t: PX}, n)
    return embed({qubits[0]: one_qubit(kind, angle)}, n)


def zz_exp(angle: float) -> np.ndarray:
    """exp(-i angle Z(x)Z) on two qubits."""
    return expm(-1j * angle * np.kron(PZ, PZ))


# ---------------------------------------------------------------------------
# SVM dual


def qp_dual(K: np.ndarray, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    """Solve min 1/2 a'Qa - e'a, y'a = 0, 0 <= a <= C with cvxopt."""
    from cvxopt import matrix, solvers

    n = len(y)
    Q = np.outer(y, y) * K
    solvers.options.update({"show_progress": False, "abstol": 1e-12, "reltol": 1e-12,
                            "feastol": 1e-12, "maxiters": 200})
    sol = solvers.qp(
        matrix(Q + 1e-14 * np.eye(n)),
        matrix(-np.ones(n)),
        matrix(np.vstack([-np.eye(n), np.eye(n)])),
        matrix(np.concatenate([np.zeros(n), C * np.ones(n)])),
        matrix(y.astype(float).reshape(1, -1)),
        matrix(0.0),
    )
    a = np.clip(np.array(sol["x"]).reshape(-1), 0.0, C)
    return a, float(0.5 * a @ Q @ a - a.sum())


# ---------------------------------------------------------------------------
# thrust


def fibonacci_hemisphere(n: int) -> np.ndarray:
    """n near-uniform unit vectors with z >= 0."""
    k = np.arange(n) + 0.5
    z = 1.0 - k / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


_GRID = None


def thrust_grid(p: np.ndarray, n_dirs: int = 1_000_000) -> tuple[np.ndarray, float]:
    """Best axis over a dense direction grid, refined by Nelder-Mead on angles."""
    global _GRID
    if _GRID is None or len(_GRID) != n_dirs:
        _GRID = fibonacci_hemisphere(n_dirs)
    total = np.linalg.norm(p, axis=1).sum()
    t = np.abs(_GRID @ p.T).sum(axis=1) / total
    starts = _GRID[np.argsort(t)[-5:]]

    def neg_t(ang):
        th, ph = ang
        d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        return -np.abs(p @ d).sum() / total

    best = None
    for s in starts:
        x0 = [np.arccos(np.clip(s[2], -1, 1)), np.arctan2(s[1], s[0])]
        r = minimize(neg_t, x0, method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        if best is None or r.fun < best.fun:
            best = r
    th, ph = best.x
    d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    return d, -best.fun


def axis_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two axes, ignoring sign."""
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(min(1.0, c))))


# ---------------------------------------------------------------------------
# ranking


def pairwise_auc(scores, labels) -> float:
    """P(score of a random positive > random negative), ties count one half."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) > 0
    sp, sn = s[pos], s[~pos]
    wins = 0.0
    for a in sp:
        wins += np.sum(a > sn) + 0.5 * np.sum(a == sn)
    return wins / (len(sp) * len(sn))
