"""Quantum-kernel SVMs for signal/background event classification.

Submodules:

- :mod:`qsvmcs.statevec`    dense statevector simulator
- :mod:`qsvmcs.preprocess`  CM boost, thrust frame, feature normalization
- :mod:`qsvmcs.encoders`    encoding circuits
- :mod:`qsvmcs.kernel`      fidelity kernels, Gram matrices, RBF baseline
- :mod:`qsvmcs.svm`         SMO-trained soft-margin SVM
- :mod:`qsvmcs.noise`       trajectory noise and readout mitigation
- :mod:`qsvmcs.datagen`     synthetic events and the event file format
- :mod:`qsvmcs.metrics`     accuracy, ROC, AUC
- :mod:`qsvmcs.experiment`  repeated-split experiments
- :mod:`qsvmcs.cli`         command-line entry point
"""

from .encoders import EncoderSpec
from .kernel import KernelMatrix, cross_gram, gram_matrix, kernel_exact, kernel_sampled
from .noise import NoiseModel
from .preprocess import Event, FeatureVector
from .svm import SvmModel, TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "EncoderSpec",
    "Event",
    "FeatureVector",
    "KernelMatrix",
    "NoiseModel",
    "SvmModel",
    "TrainConfig",
    "cross_gram",
    "gram_matrix",
    "kernel_exact",
    "kernel_sampled",
    "predict",
    "train",
]
