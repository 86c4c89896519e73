"""Encoding circuits and the kernels they induce.

Run: python demos/01_circuits_and_kernels.py
"""

import numpy as np

from qsvmcs.encoders import STRATEGIES, EncoderSpec, build
from qsvmcs.kernel import kernel_circuit, kernel_exact, kernel_sampled

rng = np.random.default_rng(1)

# A feature vector holds (p, theta, phi) per particle, already scaled to angles.
x = np.column_stack([rng.uniform(0, np.pi, 4), rng.uniform(0, np.pi, 4),
                     rng.uniform(0, 2 * np.pi, 4)]).reshape(-1)
print("features:", np.round(x, 3))

# %% Circuit sizes. One layer, four particles.
print(f"\n{'strategy':26s} qubits  gates  CNOTs")
for s in STRATEGIES:
    c = build(x, EncoderSpec(s, 1))
    print(f"{s:26s} {c.n_qubits:6d} {len(c):6d} {c.count('CNOT'):6d}")

# %% Kernel values between x and a slightly perturbed copy.
y = x + rng.normal(0, 0.2, x.size)
print("\nK(x, x') exact and sampled with 8192 shots")
for s in STRATEGIES:
    spec = EncoderSpec(s)
    k = kernel_exact(x, y, spec)
    est = kernel_sampled(x, y, spec, shots=8192, seed=0)
    print(f"  {s:26s} exact {k:.4f}  sampled {est:.4f}  ({len(kernel_circuit(x, y, spec))} gates)")

# Identical inputs: the compute-uncompute circuit returns to |0...0> on every shot.
print("\nK(x, x) sampled:", kernel_sampled(x, x, EncoderSpec(), shots=1000, seed=3))
