"""Gate noise, readout error and calibration-based mitigation.

Run: python demos/04_noise_and_mitigation.py
"""

import numpy as np

from qsvmcs import noise, statevec
from qsvmcs.encoders import EncoderSpec
from qsvmcs.kernel import kernel_circuit, kernel_exact, kernel_sampled

rng = np.random.default_rng(5)
x = np.column_stack([rng.uniform(0, np.pi, 3), rng.uniform(0, np.pi, 3),
                     rng.uniform(0, 2 * np.pi, 3)]).reshape(-1)
y = x + rng.normal(0, 0.3, x.size)

toronto = noise.NoiseModel.toronto_like()
print("toronto-like preset:", toronto.to_dict())

# %% The combinatorial circuit has far more CNOTs, so gate noise hurts it more.
for s in ("separate_particle_bloch", "combinatorial"):
    spec = EncoderSpec(s)
    k = kernel_exact(x, y, spec)
    noisy = kernel_sampled(x, y, spec, 8192, 1, toronto, trajectories=256)
    cnots = kernel_circuit(x, y, spec).count("CNOT")
    print(f"{s:24s} {cnots:3d} CNOTs  exact {k:.4f}  noisy {noisy:.4f}")

# %% Readout error only: calibrate on basis states, then undo it.
readout = noise.NoiseModel.readout_only(0.05)
spec = EncoderSpec()
circ = kernel_circuit(x, y, spec)
cal = noise.calibrate(circ.n_qubits, 8192, 2, readout)
print(f"\n{cal.mode} calibration on {cal.n_qubits} qubits; qubit 0 response:\n", cal.matrices[0])

counts = noise.noisy_counts_array(circ, 8192, 3, readout)
exact = statevec.probabilities(statevec.simulate(circ))
raw = counts / counts.sum()
fixed = noise.mitigate(counts, cal).probabilities
print(f"P(0...0): exact {exact[0]:.4f}  raw {raw[0]:.4f}  mitigated {fixed[0]:.4f}")
print(f"L1 to exact: raw {noise.l1_distance(raw, exact):.3f}  "
      f"mitigated {noise.l1_distance(fixed, exact):.3f}")
