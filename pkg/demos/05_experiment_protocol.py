"""Repeated random splits, summary statistics and a training-size sweep.

Everything lands in an output directory; rerunning with the same config
reproduces summary.csv byte for byte.

Run: python demos/05_experiment_protocol.py [output_dir]
"""

import sys

from qsvmcs.experiment import ExperimentConfig, run_experiment, sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo-run"

cfg = ExperimentConfig.from_dict({
    "seed": 11,
    "output_dir": f"{out}/run",
    "generator": {"preset": "three_particle", "n_events": 60},
    "encoder": {"strategy": "separate_particle_bloch", "layers": 2},
    "shots": 0,
    "baseline": {"kind": "rbf"},
    "splits": {"n_train": 40, "n_test": 40, "n_repeats": 3},
})
summary = run_experiment(cfg)
for row in summary.rows:
    print(f"repeat {row['repeat']} {row['method']:4s} accuracy {row['accuracy']:.3f} "
          f"AUC {row['auc']:.3f}")
for m in ("qsvm", "rbf"):
    print(f"{m}: mean AUC {summary.mean_auc(m):.3f} +- {summary.stderr_auc(m):.3f}")

# %% Vary the training-set size, keeping everything else fixed.
base = cfg.to_dict()
base["baseline"] = {"kind": "none"}
for r in sweep(base, "n_train", [10, 20, 40], f"{out}/sweep"):
    print(f"n_train {r['value']:3d}: AUC {r['mean_auc']:.3f} +- {r['stderr_auc']:.3f}")
print(f"\nartifacts under {out}/")
