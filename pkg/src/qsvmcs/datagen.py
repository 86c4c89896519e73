"""Synthetic stand-in events: isotropic "signal" and two-jet "background".

Neither class is a physics simulation. Signal particles are spread uniformly
over the sphere; background particles sit in two back-to-back cones around a
random axis. Both are recoil-corrected into their CM frame, so the only
difference the classifier can exploit is the event shape.

Event file format (text, one event per line after the header)::

    # qsvmcs-events v1
    label,n,px1,py1,pz1,...,pxn,pyn,pzn

label is 1 (signal), -1 (background) or 0 (unlabeled). Values are written
with 17 significant digits so parsing restores them exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .preprocess import BACKGROUND, SIGNAL, Event

HEADER = "# qsvmcs-events v1"

_SIGNAL_STREAM = 1
_BACKGROUND_STREAM = 2


class EventFormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class GenConfig:
    n_particles: int = 4
    n_events: int = 500
    jet_spread: float = 0.2
    momentum_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError(f"n_particles must be >= 2, got {self.n_particles}")
        if not self.jet_spread > 0:
            raise ValueError(f"jet_spread must be positive, got {self.jet_spread}")
        if not self.momentum_scale > 0:
            raise ValueError("momentum_scale must be positive")
        if self.n_events < 0:
            raise ValueError("n_events must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "default": GenConfig(),
    "three_particle": GenConfig(n_particles=3),
    "near_collinear": GenConfig(jet_spread=0.01),
}


def preset(name: str, **overrides) -> GenConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown generator preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(base, **overrides)


def _magnitudes(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    # gamma(2) keeps momenta strictly positive with mean momentum_scale
    return rng.gamma(2.0, cfg.momentum_scale / 2.0, size=cfg.n_particles)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _recoil_correct(p: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(p, axis=1).mean()
    q = p - p.mean(axis=0)
    mags = np.linalg.norm(q, axis=1)
    q = q * (scale / mags.mean())
    # uniform rescaling can leave ~1e-16 residue; remove it once more
    return q - q.mean(axis=0)


def _rng(cfg: GenConfig, rng: Optional[np.random.Generator], stream: int):
    return rng if rng is not None else np.random.default_rng([cfg.seed, stream])


def generate_signal(cfg: GenConfig, rng: Optional[np.random.Generator] = None) -> Event:
    """One isotropic event (label +1) with zero total momentum."""
    rng = _rng(cfg, rng, _SIGNAL_STREAM)
    dirs = _unit(rng.normal(size=(cfg.n_particles, 3)))
    p = dirs * _magnitudes(cfg, rng)[:, None]
    return Event(_recoil_correct(p), SIGNAL)


def generate_background(cfg: GenConfig, rng: Optional[np.random.Generator] = None) -> Event:
    """One two-cone event (label -1) with zero total momentum."""
    rng = _rng(cfg, rng, _BACKGROUND_STREAM)
    axis = _unit(rng.normal(size=3))
    side = np.where(np.arange(cfg.n_particles) % 2 == 0, 1.0, -1.0)
    g = rng.normal(size=(cfg.n_particles, 3))
    g -= np.outer(g @ axis, axis)
    dirs = _unit(side[:, None] * axis[None, :] + cfg.jet_spread * g)
    p = dirs * _magnitudes(cfg, rng)[:, None]
    return Event(_recoil_correct(p), BACKGROUND)


def generate_dataset(cfg: GenConfig) -> list[Event]:
    """`cfg.n_events` signal events followed by as many background events.

    Each event draws from its own stream derived from (seed, class, index).
    """
    sig = [
        generate_signal(cfg, np.random.default_rng([cfg.seed, _SIGNAL_STREAM, k]))
        for k in range(cfg.n_events)
    ]
    bkg = [
        generate_background(cfg, np.random.default_rng([cfg.seed, _BACKGROUND_STREAM, k]))
        for k in range(cfg.n_events)
    ]
    return sig + bkg


# ---------------------------------------------------------------------------
# files


def write_events(events: Iterable[Event], path) -> None:
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        for ev in events:
            label = 0 if ev.label is None else ev.label
            vals = ",".join(repr(float(v)) for v in ev.momenta.reshape(-1))
            fh.write(f"{label},{ev.n_particles},{vals}\n")


def read_events(path) -> list[Event]:
    events = []
    with open(path) as fh:
        first = fh.readline()
        if first.rstrip("\n") != HEADER:
            raise EventFormatError(path, 1, f"expected header {HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                label = int(fields[0])
                n = int(fields[1])
                vals = [float(v) for v in fields[2:]]
            except (ValueError, IndexError) as exc:
                raise EventFormatError(path, lineno, f"unparsable record ({exc})") from None
            if label not in (-1, 0, 1):
                raise EventFormatError(path, lineno, f"label {label} not in -1, 0, 1")
            if n < 1 or len(vals) != 3 * n:
                raise EventFormatError(
                    path, lineno, f"expected {3 * n} momentum values, found {len(vals)}"
                )
            if not np.all(np.isfinite(vals)):
                raise EventFormatError(path, lineno, "non-finite momentum value")
            events.append(Event(np.array(vals).reshape(n, 3), label or None))
    return events
