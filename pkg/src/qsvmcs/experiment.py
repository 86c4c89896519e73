"""Repeated random-split experiments.

One experiment draws ``n_repeats`` disjoint, class-balanced train/test splits
from an event pool, featurizes them with a p_max taken over the union of the
split, builds quantum Gram and cross-Gram matrices, trains the SVM and scores
the test set. An optional RBF baseline sees exactly the same splits.

Configuration is JSON::

    {
      "seed": 0,
      "output_dir": "qsvmcs-run",
      "generator": {"preset": "three_particle", "n_events": 500},
      "events_file": null,
      "encoder": {"strategy": "separate_particle_bloch", "layers": 2,
                  "intra_particle_entangle": true},
      "shots": 8192,
      "noise": null,
      "trajectories": null,
      "mitigation": {"enabled": false, "mode": null, "shots": 8192},
      "svm": {"C": 1.0, "tolerance": 1e-6, "max_iter": 1000000,
              "regularization": "shift"},
      "baseline": {"kind": "none", "sigmas": [0.5, 1.0, 2.0, 4.0]},
      "splits": {"n_train": 30, "n_test": 30, "n_repeats": 10},
      "workers": 1
    }

Every key is optional. The master seed drives generation, splits, shot
sampling, noise and calibration; the generator's own seed is always replaced
by it.

Output directory layout::

    resolved_config.json
    events.csv                    event pool (event file format)
    calibration.json              when mitigation is on
    repeat_NN/split.json          pool indices of train and test events
    repeat_NN/{train,test}_features.csv
    repeat_NN/gram.qkm, cross.qkm
    repeat_NN/model.txt, scores.csv, roc.csv
    repeat_NN/rbf_*               baseline artifacts
    record.json                   per-repeat diagnostics
    summary.csv                   one row per (method, repeat) plus mean/stderr
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import datagen
from .datagen import GenConfig
from .encoders import EncoderSpec
from .kernel import KernelMatrix, cross_gram, gram_matrix, rbf_gram, write_kernel
from .metrics import accuracy, mean_and_stderr, roc_auc, roc_curve, write_roc_csv
from .noise import CalibrationMatrix, NoiseModel, calibrate
from .preprocess import boost_to_cm, compute_p_max, features, write_features
from .svm import TrainConfig, decision_function, predict, train, write_model

log = logging.getLogger(__name__)

_SPLIT_STREAM = 11
_KERNEL_STREAM = 12
_CALIBRATION_STREAM = 13

SUMMARY_FIELDS = ["method", "encoder", "repeat", "n_train", "n_test", "accuracy", "auc", "status"]


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class Mitigation:
    enabled: bool = False
    mode: Optional[str] = None  # None: full up to 4 qubits, tensored above
    shots: int = 8192


@dataclass(frozen=True)
class Baseline:
    kind: str = "none"  # "none" or "rbf"
    sigmas: tuple = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class Splits:
    n_train: int = 30
    n_test: int = 30
    n_repeats: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "qsvmcs-run"
    generator: GenConfig = field(default_factory=lambda: datagen.preset("three_particle"))
    events_file: Optional[str] = None
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    shots: int = 8192
    noise: Optional[NoiseModel] = None
    trajectories: Optional[int] = None
    mitigation: Mitigation = field(default_factory=Mitigation)
    svm: TrainConfig = field(default_factory=TrainConfig)
    baseline: Baseline = field(default_factory=Baseline)
    splits: Splits = field(default_factory=Splits)
    workers: int = 1

    def __post_init__(self):
        s = self.splits
        if s.n_repeats < 1:
            raise ConfigError("n_repeats must be >= 1")
        if s.n_train < 2 or s.n_test < 2:
            raise ConfigError("n_train and n_test must be >= 2 (one event per class)")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        if self.noise is not None and self.shots == 0:
            raise ConfigError("a noise model needs shots > 0")
        if self.mitigation.enabled and self.noise is None:
            raise ConfigError("mitigation needs a noise model")
        if self.baseline.kind not in ("none", "rbf"):
            raise ConfigError(f"unknown baseline {self.baseline.kind!r}")
        if self.events_file is not None and not os.path.exists(self.events_file):
            raise ConfigError(f"events file {self.events_file} does not exist")
        if self.trajectories is not None and self.trajectories < 1:
            raise ConfigError("trajectories must be >= 1")

    # -- (de)serialization ------------------------------------------------

    def to_dict(self) -> dict:
        gen = self.generator.to_dict()
        gen.pop("seed")
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "generator": gen,
            "events_file": self.events_file,
            "encoder": asdict(self.encoder),
            "shots": self.shots,
            "noise": None if self.noise is None else self.noise.to_dict(),
            "trajectories": self.trajectories,
            "mitigation": asdict(self.mitigation),
            "svm": asdict(self.svm),
            "baseline": {"kind": self.baseline.kind, "sigmas": list(self.baseline.sigmas)},
            "splits": asdict(self.splits),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = {k: d[k] for k in ("seed", "output_dir", "events_file", "shots",
                                    "trajectories", "workers") if k in d}
            if "generator" in d:
                g = dict(d["generator"] or {})
                g.pop("seed", None)
                kw["generator"] = datagen.preset(g.pop("preset", "three_particle"), **g)
            if "encoder" in d:
                kw["encoder"] = EncoderSpec(**d["encoder"])
            if d.get("noise") is not None:
                kw["noise"] = NoiseModel.from_dict(d["noise"])
            if "mitigation" in d:
                kw["mitigation"] = Mitigation(**d["mitigation"])
            if "svm" in d:
                kw["svm"] = TrainConfig(**d["svm"])
            if "baseline" in d:
                b = dict(d["baseline"])
                if "sigmas" in b:
                    b["sigmas"] = tuple(float(s) for s in b["sigmas"])
                kw["baseline"] = Baseline(**b)
            if "splits" in d:
                kw["splits"] = Splits(**d["splits"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return d


def apply_overrides(d: dict, overrides: Sequence[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values parse as JSON, else as strings."""
    out = copy.deepcopy(d)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            nxt = node.get(p)
            if not isinstance(nxt, dict):
                nxt = {}
                node[p] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# running


@dataclass
class Summary:
    rows: list
    aggregates: list
    record: dict

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    def mean_auc(self, method: str = "qsvm") -> float:
        for a in self.aggregates:
            if a["method"] == method and a["repeat"] == "mean":
                return a["auc"]
        raise KeyError(method)

    def stderr_auc(self, method: str = "qsvm") -> float:
        for a in self.aggregates:
            if a["method"] == method and a["repeat"] == "stderr":
                return a["auc"]
        raise KeyError(method)


def _derived_seed(*entropy: int) -> int:
    # 63-bit so it fits the signed seed field of kernel files
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0] >> 1)


def draw_split(labels: np.ndarray, n_train: int, n_test: int, seed: int, repeat: int):
    """Disjoint, class-balanced index arrays (train, test) into the pool."""
    rng = np.random.default_rng([seed, _SPLIT_STREAM, repeat])
    sig = rng.permutation(np.flatnonzero(labels > 0))
    bkg = rng.permutation(np.flatnonzero(labels < 0))
    tr_s, te_s = n_train - n_train // 2, n_test - n_test // 2
    tr_b, te_b = n_train // 2, n_test // 2
    if tr_s + te_s > sig.size or tr_b + te_b > bkg.size:
        raise ConfigError(
            f"pool has {sig.size} signal / {bkg.size} background events, "
            f"split needs {tr_s + te_s} / {tr_b + te_b}"
        )
    train_idx = np.concatenate([sig[:tr_s], bkg[:tr_b]])
    test_idx = np.concatenate([sig[tr_s : tr_s + te_s], bkg[tr_b : tr_b + te_b]])
    return np.sort(train_idx), np.sort(test_idx)


def select_sigma(X: np.ndarray, y: np.ndarray, sigmas: Sequence[float], svm: TrainConfig) -> float:
    """RBF width by 3-fold cross-validated AUC on the training set (first best wins)."""
    folds = np.arange(len(y)) % 3
    best, best_auc = float(sigmas[0]), -np.inf
    for s in sigmas:
        aucs = []
        for f in range(3):
            tr, va = folds != f, folds == f
            if len(np.unique(y[tr])) < 2 or len(np.unique(y[va])) < 2:
                continue
            m = train(rbf_gram(X[tr], X[tr], s), y[tr], svm)
            aucs.append(roc_auc(decision_function(m, rbf_gram(X[va], X[tr], s)), y[va]))
        score = np.mean(aucs) if aucs else -np.inf
        if score > best_auc:
            best, best_auc = float(s), score
    return best


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_scores(path, scores: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "label"])
        for s, y in zip(scores, labels):
            w.writerow([repr(float(s)), int(y)])


def _evaluate(model, k_cross, y_test, out_dir, prefix: str) -> tuple[float, float]:
    pred, _ = predict(model, k_cross)
    scores = decision_function(model, k_cross)
    _write_scores(os.path.join(out_dir, f"{prefix}scores.csv"), scores, y_test)
    write_roc_csv(os.path.join(out_dir, f"{prefix}roc.csv"), roc_curve(scores, y_test))
    return accuracy(pred, y_test), roc_auc(scores, y_test)


def run_repeat(
    cfg: ExperimentConfig,
    events: list,
    repeat: int,
    calibration: Optional[CalibrationMatrix] = None,
) -> tuple[list, dict]:
    """One split: returns summary rows and a diagnostics record."""
    out = os.path.join(cfg.output_dir, f"repeat_{repeat:02d}")
    os.makedirs(out, exist_ok=True)
    n_tr, n_te = cfg.splits.n_train, cfg.splits.n_test
    rec: dict = {"repeat": repeat}
    rows: list = []
    stage = "split"

    def row(method, enc, acc=float("nan"), auc=float("nan"), status="ok"):
        return {"method": method, "encoder": enc, "repeat": repeat, "n_train": n_tr,
                "n_test": n_te, "accuracy": acc, "auc": auc, "status": status}

    try:
        labels = np.array([e.label for e in events])
        tr, te = draw_split(labels, n_tr, n_te, cfg.seed, repeat)
        rec["train_indices"], rec["test_indices"] = tr.tolist(), te.tolist()
        with open(os.path.join(out, "split.json"), "w") as fh:
            json.dump({"train": rec["train_indices"], "test": rec["test_indices"]}, fh)

        stage = "preprocess"
        train_ev = [events[i] for i in tr]
        test_ev = [events[i] for i in te]
        p_max = compute_p_max([[boost_to_cm(e) for e in train_ev + test_ev]])
        X_tr = features(train_ev, p_max)
        X_te = features(test_ev, p_max)
        rec["p_max"] = p_max
        rec["overflow"] = sum(f.overflow for f in X_tr + X_te)
        write_features(os.path.join(out, "train_features.csv"), X_tr, p_max)
        write_features(os.path.join(out, "test_features.csv"), X_te, p_max)
        y_tr = labels[tr].astype(float)
        y_te = labels[te].astype(float)

        stage = "kernel"
        kseed = _derived_seed(cfg.seed, _KERNEL_STREAM, repeat)
        common = dict(spec=cfg.encoder, shots=cfg.shots, seed=kseed, noise=cfg.noise,
                      calibration=calibration, trajectories=cfg.trajectories)
        K = gram_matrix(X_tr, **common)
        Kx = cross_gram(X_te, X_tr, **common)
        write_kernel(os.path.join(out, "gram.qkm"), K)
        write_kernel(os.path.join(out, "cross.qkm"), Kx)

        stage = "train"
        model = train(K, y_tr, cfg.svm)
        write_model(os.path.join(out, "model.txt"), model)
        rec["converged"] = model.converged
        rec["diagonal_shift"] = model.diagonal_shift
        rec["n_support"] = int(model.support_indices.size)

        stage = "evaluate"
        acc, auc = _evaluate(model, Kx, y_te, out, "")
        rows.append(row("qsvm", cfg.encoder.tag, acc, auc))

        if cfg.baseline.kind == "rbf":
            stage = "baseline"
            A = np.array([f.values for f in X_tr])
            B = np.array([f.values for f in X_te])
            sigma = select_sigma(A, y_tr, cfg.baseline.sigmas, cfg.svm)
            rec["rbf_sigma"] = sigma
            Kr = KernelMatrix(rbf_gram(A, A, sigma), f"rbf:sigma={sigma!r}", 0, 0)
            Krx = KernelMatrix(rbf_gram(B, A, sigma), Kr.encoder, 0, 0)
            rmodel = train(Kr, y_tr, cfg.svm)
            write_model(os.path.join(out, "rbf_model.txt"), rmodel)
            write_kernel(os.path.join(out, "rbf_cross.qkm"), Krx)
            acc, auc = _evaluate(rmodel, Krx, y_te, out, "rbf_")
            rows.append(row("rbf", Kr.encoder, acc, auc))
    except Exception as exc:
        msg = f"repeat {repeat}: {stage} failed: {type(exc).__name__}: {exc}"
        log.error(msg)
        rec["error"] = msg
        failed = ["qsvm"] + (["rbf"] if cfg.baseline.kind == "rbf" else [])
        done = {r["method"] for r in rows}
        rows += [row(m, cfg.encoder.tag if m == "qsvm" else "rbf", status=f"failed:{stage}")
                 for m in failed if m not in done]
    return rows, rec


def _run_repeat_args(args):
    return run_repeat(*args)


def _aggregate(rows: list) -> list:
    out = []
    methods = list(dict.fromkeys(r["method"] for r in rows))
    for m in methods:
        ok = [r for r in rows if r["method"] == m and r["status"] == "ok"]
        if not ok:
            continue
        acc = mean_and_stderr([r["accuracy"] for r in ok])
        auc = mean_and_stderr([r["auc"] for r in ok])
        enc = ok[0]["encoder"] if len({r["encoder"] for r in ok}) == 1 else "*"
        for k, label in enumerate(("mean", "stderr")):
            out.append({"method": m, "encoder": enc, "repeat": label,
                        "n_train": ok[0]["n_train"], "n_test": ok[0]["n_test"],
                        "accuracy": acc[k], "auc": auc[k], "status": f"n={len(ok)}"})
    return out


def write_summary(path, rows: list, aggregates: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in rows + aggregates:
            w.writerow([_fmt(r[k]) for k in SUMMARY_FIELDS])


def load_events(cfg: ExperimentConfig) -> list:
    if cfg.events_file is not None:
        return datagen.read_events(cfg.events_file)
    return datagen.generate_dataset(replace(cfg.generator, seed=cfg.seed))


def run_experiment(cfg: ExperimentConfig) -> Summary:
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "resolved_config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    events = load_events(cfg)
    datagen.write_events(events, os.path.join(cfg.output_dir, "events.csv"))
    if any(e.label is None for e in events):
        raise ConfigError("experiment events must all be labeled")

    cal = None
    if cfg.mitigation.enabled:
        n_features = 3 * events[0].n_particles
        nq = cfg.encoder.n_qubits(n_features)
        cal = calibrate(nq, cfg.mitigation.shots, [cfg.seed, _CALIBRATION_STREAM],
                        cfg.noise, cfg.mitigation.mode)
        with open(os.path.join(cfg.output_dir, "calibration.json"), "w") as fh:
            json.dump({"mode": cal.mode, "n_qubits": cal.n_qubits, "shots": cal.shots,
                       "matrices": [m.tolist() for m in cal.matrices]}, fh)

    jobs = [(cfg, events, r, cal) for r in range(cfg.splits.n_repeats)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_repeat_args, jobs))
    else:
        results = [run_repeat(*j) for j in jobs]

    rows = [r for rs, _ in results for r in rs]
    records = [rec for _, rec in results]
    aggregates = _aggregate(rows)
    write_summary(os.path.join(cfg.output_dir, "summary.csv"), rows, aggregates)
    record = {"p_max": [r.get("p_max") for r in records], "repeats": records}
    with open(os.path.join(cfg.output_dir, "record.json"), "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
    return Summary(rows, aggregates, record)


# ---------------------------------------------------------------------------
# sweeps

_AXIS_ALIASES = {
    "encoder": "encoder.strategy",
    "strategy": "encoder.strategy",
    "n_train": "splits.n_train",
    "layers": "encoder.layers",
    "shots": "shots",
    "C": "svm.C",
}

SWEEP_FIELDS = ["axis", "value", "method", "encoder", "n_ok",
                "mean_accuracy", "stderr_accuracy", "mean_auc", "stderr_auc"]


def sweep(base: dict, axis: str, values: Sequence, output_dir: str) -> list:
    """Run one experiment per value of `axis`; returns (and writes) sweep rows."""
    key = _AXIS_ALIASES.get(axis, axis)
    os.makedirs(output_dir, exist_ok=True)
    out_rows = []
    for k, v in enumerate(values):
        sub = os.path.join(output_dir, f"{k:02d}_{str(v).replace('/', '_')}")
        d = apply_overrides(base, [f"{key}={json.dumps(v)}", f"output_dir={json.dumps(sub)}"])
        summary = run_experiment(ExperimentConfig.from_dict(d))
        aggs = summary.aggregates
        for m in dict.fromkeys(a["method"] for a in aggs):
            mean = next(a for a in aggs if a["method"] == m and a["repeat"] == "mean")
            err = next(a for a in aggs if a["method"] == m and a["repeat"] == "stderr")
            out_rows.append({
                "axis": key, "value": v, "method": m, "encoder": mean["encoder"],
                "n_ok": mean["status"][2:],
                "mean_accuracy": mean["accuracy"], "stderr_accuracy": err["accuracy"],
                "mean_auc": mean["auc"], "stderr_auc": err["auc"],
            })
    with open(os.path.join(output_dir, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_FIELDS)
        for r in out_rows:
            w.writerow([_fmt(r[f]) for f in SWEEP_FIELDS])
    return out_rows
