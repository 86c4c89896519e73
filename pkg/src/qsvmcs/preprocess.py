"""Event kinematics: CM boost, thrust axis, thrust-frame spherical coordinates
and the momentum normalization that turns an event into circuit parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

SIGNAL = 1
BACKGROUND = -1


class DegenerateEventError(ValueError):
    """Event with no nonzero momentum; the thrust axis is undefined."""


class UnphysicalEventError(ValueError):
    """Total energy does not exceed total momentum, so no CM frame exists."""


@dataclass(frozen=True)
class Event:
    """Particle 3-momenta (GeV/c) of one collision event.

    `momenta` has shape (k, 3). `label` is +1 for signal, -1 for continuum
    background and None when unknown. `energies` is optional; when absent
    particles are treated as massless.
    """

    momenta: np.ndarray
    label: Optional[int] = None
    energies: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        p = np.array(self.momenta, dtype=float).reshape(-1, 3)
        if p.shape[0] < 1:
            raise ValueError("an event needs at least one particle")
        if not np.all(np.isfinite(p)):
            raise ValueError("momentum components must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "momenta", p)
        if self.label is not None and self.label not in (SIGNAL, BACKGROUND):
            raise ValueError(f"label must be +1, -1 or None, got {self.label!r}")
        if self.energies is not None:
            e = np.array(self.energies, dtype=float).reshape(-1)
            if e.shape[0] != p.shape[0]:
                raise ValueError("one energy per particle required")
            e.setflags(write=False)
            object.__setattr__(self, "energies", e)

    @property
    def n_particles(self) -> int:
        return self.momenta.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Event):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.momenta, other.momenta)

    __hash__ = None


@dataclass(frozen=True)
class ThrustFrameEvent:
    """Per-particle (p, theta, phi) about the thrust axis.

    `spherical` has shape (k, 3); theta in [0, pi], phi in [-pi, pi).
    """

    spherical: np.ndarray
    thrust_axis: np.ndarray
    thrust_value: float
    label: Optional[int] = None


@dataclass(frozen=True)
class FeatureVector:
    """Flat [p~_1, theta_1, phi_1, ..., p~_k, theta_k, phi_k] with p~ = p * pi / p_max.

    `overflow` counts particles whose momentum exceeded p_max and was clamped.
    """

    values: np.ndarray
    label: Optional[int] = None
    overflow: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_particles(self) -> int:
        return len(self.values) // 3

    def per_particle(self) -> np.ndarray:
        return self.values.reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# thrust


def _seed_directions() -> np.ndarray:
    # vertices of a regular dodecahedron = face centres of an icosahedron
    g = (1 + np.sqrt(5)) / 2
    pts = [(sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    for a in (-1, 1):
        for b in (-1, 1):
            pts.append((0, a / g, b * g))
            pts.append((a / g, b * g, 0))
            pts.append((a * g, 0, b / g))
    d = np.array(pts, dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


SEED_DIRECTIONS = _seed_directions()


def thrust_of(momenta: np.ndarray, axis: np.ndarray) -> float:
    """T(n) = sum |P_i . n| / sum |P_i| for a unit axis n."""
    return float(np.abs(momenta @ axis).sum() / np.linalg.norm(momenta, axis=1).sum())


def canonical_axis(axis: np.ndarray) -> np.ndarray:
    """Pick the representative of {n, -n} with z >= 0 (ties: y >= 0, then x >= 0)."""
    n = np.asarray(axis, dtype=float)
    for comp in (n[2], n[1], n[0]):
        if comp > 0:
            return n.copy()
        if comp < 0:
            return -n
    return n.copy()


def _ascend(momenta: np.ndarray, start: np.ndarray, max_iter: int = 100) -> np.ndarray:
    n = start
    signs = None
    for _ in range(max_iter):
        s = np.where(momenta @ n >= 0, 1.0, -1.0)
        if signs is not None and np.array_equal(s, signs):
            break
        signs = s
        v = s @ momenta
        norm = np.linalg.norm(v)
        if norm == 0:
            break
        n = v / norm
    return n


# exhaustive sign enumeration is exact and cheap up to this many particles
_EXACT_MAX_PARTICLES = 16


def _sign_patterns(k: int) -> np.ndarray:
    # the first sign is fixed to +1: s and -s give the same axis up to sign
    bits = (np.arange(1 << (k - 1))[:, None] >> np.arange(k - 1)) & 1
    return np.column_stack([np.ones(len(bits)), 1.0 - 2.0 * bits])


def thrust_axis(event: Event | np.ndarray) -> tuple[np.ndarray, float]:
    """Unit axis maximizing the thrust, and the thrust value.

    The maximizing axis is parallel to sum s_i P_i for some sign vector s.
    Up to 16 particles every sign vector is tried. Larger events use the
    fixed-point ascent n <- sum sign(P_i . n) P_i / |...| started from 20
    fixed directions and from each particle; the best local maximum wins.
    """
    p = event.momenta if isinstance(event, Event) else np.asarray(event, dtype=float)
    mags = np.linalg.norm(p, axis=1)
    if mags.sum() == 0:
        raise DegenerateEventError("all particle momenta are zero")
    if len(p) <= _EXACT_MAX_PARTICLES:
        v = _sign_patterns(len(p)) @ p
        norms = np.linalg.norm(v, axis=1)
        k = int(np.argmax(norms))
        # polish: one ascent step recomputes the sum from the axis itself
        best = _ascend(p, v[k] / norms[k])
        return canonical_axis(best), float(np.abs(p @ best).sum() / mags.sum())
    starts = np.vstack([SEED_DIRECTIONS, p[mags > 0] / mags[mags > 0, None]])
    best, best_t = None, -1.0
    for seed in starts:
        n = _ascend(p, seed)
        t = float(np.abs(p @ n).sum() / mags.sum())
        if t > best_t + 1e-15:
            best, best_t = n, t
    return canonical_axis(best), best_t


# ---------------------------------------------------------------------------
# frames


def boost_to_cm(event: Event, energies: Optional[Sequence[float]] = None) -> Event:
    """Lorentz-boost the event into its centre-of-momentum frame.

    Energies default to those stored on the event, else |p| (massless). The
    returned event carries the boosted energies.
    """
    p = event.momenta
    if energies is None:
        energies = event.energies
    e = np.linalg.norm(p, axis=1) if energies is None else np.asarray(energies, dtype=float)
    total_p = p.sum(axis=0)
    total_e = e.sum()
    p_norm = np.linalg.norm(total_p)
    if total_e <= p_norm:
        raise UnphysicalEventError(
            f"total energy {total_e:g} does not exceed total momentum {p_norm:g}"
        )
    if p_norm == 0:
        return Event(p.copy(), event.label, e.copy())
    beta = total_p / total_e
    b2 = beta @ beta
    gamma = 1.0 / np.sqrt(1.0 - b2)
    bp = p @ beta
    new_p = p + (((gamma - 1.0) * bp / b2 - gamma * e)[:, None]) * beta[None, :]
    new_e = gamma * (e - bp)
    return Event(new_p, event.label, new_e)


def _frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0])
    perp = ref - (ref @ axis) * axis
    if np.linalg.norm(perp) < 1e-6:
        ref = np.array([0.0, 1.0, 0.0])
        perp = ref - (ref @ axis) * axis
    e1 = perp / np.linalg.norm(perp)
    e2 = np.cross(axis, e1)
    return e1, e2


def to_thrust_frame(event: Event) -> ThrustFrameEvent:
    """Spherical coordinates with theta measured from the thrust axis.

    phi is measured about the axis from the component of the global x axis
    perpendicular to it (y when the axis is parallel to x).
    """
    axis, t = thrust_axis(event)
    p = event.momenta
    mag = np.linalg.norm(p, axis=1)
    along = p @ axis
    safe = np.where(mag > 0, mag, 1.0)
    theta = np.where(mag > 0, np.arccos(np.clip(along / safe, -1.0, 1.0)), 0.0)
    e1, e2 = _frame(axis)
    phi = np.arctan2(p @ e2, p @ e1)
    phi = np.where(phi >= np.pi, -np.pi, phi)
    return ThrustFrameEvent(np.column_stack([mag, theta, phi]), axis, t, event.label)


def normalize(tfe: ThrustFrameEvent, p_max: float) -> FeatureVector:
    """Scale momenta by pi / p_max (clamped at pi) and wrap phi into [0, 2*pi)."""
    if not p_max > 0:
        raise ValueError(f"p_max must be positive, got {p_max}")
    sph = np.asarray(tfe.spherical, dtype=float)
    scaled = sph[:, 0] * (np.pi / p_max)
    overflow = int(np.count_nonzero(sph[:, 0] > p_max))
    scaled = np.minimum(scaled, np.pi)
    phi = np.mod(sph[:, 2], 2 * np.pi)
    # mod can round a tiny negative up to exactly 2*pi
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)
    values = np.column_stack([scaled, sph[:, 1], phi]).reshape(-1)
    return FeatureVector(values, tfe.label, overflow)


def compute_p_max(datasets: Iterable[Iterable[Event]]) -> float:
    """Largest particle |p| over every event of every collection."""
    best = None
    for events in datasets:
        for ev in events:
            m = float(np.linalg.norm(ev.momenta, axis=1).max())
            best = m if best is None else max(best, m)
    if best is None:
        raise ValueError("no events supplied")
    return best


def features(
    events: Sequence[Event], p_max: float, boost: bool = True
) -> list[FeatureVector]:
    """Full preprocessing chain for a collection of events."""
    out = []
    for ev in events:
        if boost:
            ev = boost_to_cm(ev)
        out.append(normalize(to_thrust_frame(ev), p_max))
    return out


# ---------------------------------------------------------------------------
# feature files
#
#   # qsvmcs-features v1
#   # p_max <float>
#   label,overflow,v1,v2,...
#
# label 1, -1 or 0 (unlabeled); values written with repr, so parsing is exact.

FEATURES_HEADER = "# qsvmcs-features v1"


def write_features(path, feats: Sequence[FeatureVector], p_max: float) -> None:
    with open(path, "w") as fh:
        fh.write(FEATURES_HEADER + "\n")
        fh.write(f"# p_max {float(p_max)!r}\n")
        for f in feats:
            vals = ",".join(repr(float(v)) for v in f.values)
            fh.write(f"{f.label or 0},{f.overflow},{vals}\n")


def read_features(path) -> tuple[list[FeatureVector], float]:
    """Feature vectors and the p_max they were normalized with."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or lines[0] != FEATURES_HEADER or not lines[1].startswith("# p_max "):
        raise ValueError(f"{path}: not a feature file")
    p_max = float(lines[1].split()[2])
    out = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split(",")
        try:
            label, overflow = int(fields[0]), int(fields[1])
            vals = np.array([float(v) for v in fields[2:]])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: unparsable record ({exc})") from None
        if vals.size == 0 or vals.size % 3 or label not in (-1, 0, 1):
            raise ValueError(f"{path}:{lineno}: malformed record")
        out.append(FeatureVector(vals, label or None, overflow))
    return out, p_max
