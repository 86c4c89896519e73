"""Train a quantum-kernel SVM and an RBF baseline on the same split.

Run: python demos/03_train_and_score.py
"""

import numpy as np

from qsvmcs import datagen, preprocess
from qsvmcs.encoders import EncoderSpec
from qsvmcs.kernel import cross_gram, gram_matrix, rbf_gram
from qsvmcs.metrics import accuracy, roc_auc
from qsvmcs.svm import TrainConfig, decision_function, predict, train

events = datagen.generate_dataset(datagen.preset("default", n_events=100, seed=3))
rng = np.random.default_rng(3)
order = rng.permutation(len(events))
tr, te = order[:120], order[120:]

p_max = preprocess.compute_p_max([[preprocess.boost_to_cm(events[i]) for i in order]])
X = preprocess.features(events, p_max)
X_tr, X_te = [X[i] for i in tr], [X[i] for i in te]
y_tr = np.array([X[i].label for i in tr])
y_te = np.array([X[i].label for i in te])

spec = EncoderSpec("separate_particle_bloch", 2)
K = gram_matrix(X_tr, spec)           # exact statevector kernel
Kx = cross_gram(X_te, X_tr, spec)
model = train(K, y_tr, TrainConfig(C=1.0))
labels, probs = predict(model, Kx)
scores = decision_function(model, Kx)
print(f"QSVM  {spec.tag}: {model.support_indices.size} support vectors, "
      f"accuracy {accuracy(labels, y_te):.3f}, AUC {roc_auc(scores, y_te):.3f}")
print("first squashed scores:", np.round(probs[:5], 3))

A = np.array([f.values for f in X_tr])
B = np.array([f.values for f in X_te])
for sigma in (1.0, 2.0, 4.0):
    m = train(rbf_gram(A, A, sigma), y_tr)
    s = decision_function(m, rbf_gram(B, A, sigma))
    print(f"RBF sigma={sigma}: AUC {roc_auc(s, y_te):.3f}")
