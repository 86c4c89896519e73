"""Command-line pipeline: generate -> preprocess -> kernel -> train -> evaluate.

Exit status: 0 success, 1 usage error (bad flags, missing inputs, invalid
config), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import datagen
from .encoders import STRATEGIES, EncoderSpec
from .experiment import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    run_experiment,
    sweep,
)
from .kernel import cross_gram, gram_matrix, read_kernel, write_kernel, write_kernel_csv
from .metrics import accuracy, roc_auc, roc_curve, write_roc_csv
from .noise import NoiseModel, calibrate
from .preprocess import (
    boost_to_cm,
    compute_p_max,
    features,
    read_features,
    write_features,
)
from .svm import TrainConfig, decision_function, predict, read_model, train, write_model

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _existing(path: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"input file {path} does not exist")
    return path


def _labels(feats) -> np.ndarray:
    y = np.array([0 if f.label is None else f.label for f in feats])
    if np.any(y == 0):
        raise UsageError("every event needs a label for this command")
    return y


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(a) -> int:
    overrides = {k: v for k, v in (("n_particles", a.n_particles), ("n_events", a.n_events),
                                   ("jet_spread", a.jet_spread),
                                   ("momentum_scale", a.momentum_scale), ("seed", a.seed))
                 if v is not None}
    cfg = datagen.preset(a.preset, **overrides)
    events = datagen.generate_dataset(cfg)
    datagen.write_events(events, a.output)
    print(f"wrote {len(events)} events to {a.output}")
    return 0


def cmd_preprocess(a) -> int:
    events = datagen.read_events(_existing(a.events))
    if a.p_max is not None:
        p_max = a.p_max
    else:
        pools = [events] + [datagen.read_events(_existing(p)) for p in a.p_max_from]
        p_max = compute_p_max([[boost_to_cm(e) for e in pool] if not a.no_boost else pool
                               for pool in pools])
    feats = features(events, p_max, boost=not a.no_boost)
    write_features(a.output, feats, p_max)
    over = sum(f.overflow for f in feats)
    print(f"wrote {len(feats)} feature vectors to {a.output} (p_max {p_max!r}, overflow {over})")
    return 0


def _noise_from_args(a) -> Optional[NoiseModel]:
    if a.noise is None:
        return None
    if a.noise in ("toronto-like", "toronto_like"):
        return NoiseModel.toronto_like()
    if os.path.exists(a.noise):
        with open(a.noise) as fh:
            return NoiseModel.from_dict(json.load(fh))
    raise UsageError(f"--noise must be 'toronto-like' or a JSON file, got {a.noise!r}")


def cmd_kernel(a) -> int:
    X, _ = read_features(_existing(a.features))
    spec = EncoderSpec(a.strategy, a.layers, not a.no_intra)
    model = _noise_from_args(a)
    if model is not None and a.shots == 0:
        raise UsageError("--noise needs --shots > 0")
    cal = None
    if a.mitigate:
        if model is None:
            raise UsageError("--mitigate needs --noise")
        cal = calibrate(spec.n_qubits(len(X[0])), a.calibration_shots, [a.seed, 13],
                        model, a.calibration_mode)
    kw = dict(shots=a.shots, seed=a.seed, noise=model, calibration=cal,
              trajectories=a.trajectories, workers=a.workers)
    if a.against:
        train_X, _ = read_features(_existing(a.against))
        km = cross_gram(X, train_X, spec, **kw)
    else:
        km = gram_matrix(X, spec, checkpoint=a.checkpoint, **kw)
    write_kernel(a.output, km)
    if a.csv:
        write_kernel_csv(a.csv, km)
    print(f"wrote {km.shape[0]}x{km.shape[1]} kernel to {a.output}")
    return 0


def cmd_train(a) -> int:
    km = read_kernel(_existing(a.kernel))
    feats, _ = read_features(_existing(a.features))
    y = _labels(feats)
    if km.shape != (len(y), len(y)):
        raise UsageError(f"kernel shape {km.shape} does not match {len(y)} training events")
    model = train(km, y, TrainConfig(C=a.C, tolerance=a.tolerance))
    write_model(a.output, model)
    print(f"trained on {len(y)} events: {model.support_indices.size} support vectors, "
          f"bias {model.bias:.6g}, converged {model.converged}")
    return 0


def _score(a):
    model = read_model(_existing(a.model))
    km = read_kernel(_existing(a.kernel))
    feats, _ = read_features(_existing(a.features))
    y = _labels(feats)
    if km.shape[0] != len(y):
        raise UsageError(f"kernel has {km.shape[0]} rows for {len(y)} test events")
    return model, km, y


def cmd_evaluate(a) -> int:
    model, km, y = _score(a)
    pred, _ = predict(model, km)
    scores = decision_function(model, km)
    result = {"n": int(len(y)), "accuracy": accuracy(pred, y), "auc": roc_auc(scores, y)}
    text = json.dumps(result, indent=2)
    if a.output:
        with open(a.output, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_roc(a) -> int:
    model, km, y = _score(a)
    pts = roc_curve(decision_function(model, km), y)
    write_roc_csv(a.output, pts)
    print(f"wrote {len(pts)} ROC points to {a.output}")
    return 0


def _experiment_dict(a) -> dict:
    d = load_config(_existing(a.config)) if a.config else {}
    d = apply_overrides(d, a.set or [])
    if a.output:
        d["output_dir"] = a.output
    if a.seed is not None:
        d["seed"] = a.seed
    return d


def _print_summary(summary) -> None:
    for r in summary.aggregates:
        if r["repeat"] == "mean":
            err = next(x for x in summary.aggregates
                       if x["method"] == r["method"] and x["repeat"] == "stderr")
            print(f"{r['method']:5s} {r['encoder']:36s} accuracy {r['accuracy']:.3f} "
                  f"+- {err['accuracy']:.3f}  AUC {r['auc']:.3f} +- {err['auc']:.3f}  "
                  f"({r['status']})")


def cmd_run(a) -> int:
    cfg = ExperimentConfig.from_dict(_experiment_dict(a))
    summary = run_experiment(cfg)
    _print_summary(summary)
    if summary.failed:
        for r in summary.failed:
            print(f"repeat {r['repeat']} {r['method']}: {r['status']}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def cmd_sweep(a) -> int:
    d = _experiment_dict(a)
    values = [_parse_value(v) for v in a.values.split(",")]
    out = d.get("output_dir", "qsvmcs-sweep")
    ExperimentConfig.from_dict(d)  # validate before the first run
    rows = sweep(d, a.axis, values, out)
    for r in rows:
        print(f"{r['value']!s:28s} {r['method']:5s} AUC {r['mean_auc']:.3f} "
              f"+- {r['stderr_auc']:.3f}")
    return 0


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


# ---------------------------------------------------------------------------
# parser


def _add_encoder_flags(p) -> None:
    p.add_argument("--strategy", default="separate_particle_bloch", choices=STRATEGIES)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--no-intra", action="store_true",
                   help="drop the intra-particle ZZ block (separate_particle_bloch)")


def _add_experiment_flags(p) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry, e.g. splits.n_train=100 (repeatable)")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsvmcs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic event file")
    p.add_argument("--preset", default="default", choices=sorted(datagen.PRESETS))
    p.add_argument("--n-particles", type=int)
    p.add_argument("--n-events", type=int, help="events per class")
    p.add_argument("--jet-spread", type=float)
    p.add_argument("--momentum-scale", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="events -> normalized feature vectors")
    p.add_argument("events")
    p.add_argument("--p-max", type=float, help="fixed normalization momentum")
    p.add_argument("--p-max-from", nargs="*", default=[],
                   help="further event files contributing to p_max")
    p.add_argument("--no-boost", action="store_true", help="skip the CM boost")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("kernel", help="Gram matrix, or cross kernel with --against")
    p.add_argument("features")
    p.add_argument("--against", help="training features; output is test x train")
    _add_encoder_flags(p)
    p.add_argument("--shots", type=int, default=0, help="0 selects exact kernels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", help="'toronto-like' or a JSON noise model file")
    p.add_argument("--trajectories", type=int, help="cap on distinct noise trajectories")
    p.add_argument("--mitigate", action="store_true")
    p.add_argument("--calibration-mode", choices=("full", "tensored"))
    p.add_argument("--calibration-shots", type=int, default=8192)
    p.add_argument("--checkpoint", help="row checkpoint file (Gram matrices only)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="also write the matrix as CSV")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("train", help="fit an SVM on a Gram matrix")
    p.add_argument("kernel")
    p.add_argument("features", help="training features (labels)")
    p.add_argument("-C", "--C", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    for name, fn, text in (("evaluate", cmd_evaluate, "accuracy and AUC on a test set"),
                           ("roc", cmd_roc, "ROC curve CSV for a test set")):
        p = sub.add_parser(name, help=text)
        p.add_argument("model")
        p.add_argument("kernel", help="cross kernel, test x train")
        p.add_argument("features", help="test features (labels)")
        p.add_argument("-o", "--output", required=(name == "roc"))
        p.set_defaults(func=fn)

    p = sub.add_parser("run", help="repeated-split experiment")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one experiment per value of a config axis")
    _add_experiment_flags(p)
    p.add_argument("--axis", required=True,
                   help="dotted config key or alias: encoder, n_train, layers, shots, C")
    p.add_argument("--values", required=True, help="comma separated values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"qsvmcs {a.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"qsvmcs {a.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
