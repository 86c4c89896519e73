import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pairwise_auc, qp_dual
from qsvmcs import svm
from qsvmcs.kernel import KernelMatrix, rbf_gram
from qsvmcs.metrics import roc_auc
from qsvmcs.svm import TrainConfig

TIGHT = TrainConfig(C=1.0, tolerance=1e-9)


def problem(seed, n, sigma=1.0):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, 3))
    y = np.where(P[:, 0] + 0.5 * rng.normal(size=n) > 0, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return rbf_gram(P, P, sigma), y, P


def test_two_point_analytic():
    m = svm.train(np.eye(2), [1, -1], TrainConfig(C=10))
    np.testing.assert_allclose(m.alphas, [1, 1], atol=1e-9)
    assert abs(m.bias) < 1e-9
    np.testing.assert_allclose(svm.decision_function(m, np.eye(2)), [1, -1], atol=1e-9)


def test_errors():
    with pytest.raises(ValueError):
        svm.train(np.eye(3), [1, 1, 1])
    with pytest.raises(ValueError):
        svm.train(np.eye(2), [1, 0])
    with pytest.raises(ValueError):
        svm.train(np.eye(3), [1, -1])
    bad = np.eye(2)
    bad[0, 1] = np.nan
    with pytest.raises(ValueError):
        svm.train(bad, [1, -1])
    m = svm.train(np.eye(2), [1, -1])
    with pytest.raises(ValueError):
        svm.decision_function(m, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        TrainConfig(C=0)
    with pytest.raises(ValueError):
        TrainConfig(tolerance=-1)


@pytest.mark.parametrize("seed", range(12))
def test_objective_matches_qp_oracle(seed):
    n = 2 + seed % 11
    K, y, _ = problem(seed, n)
    C = [0.1, 1.0, 10.0][seed % 3]
    m = svm.train(K, y, TrainConfig(C=C, tolerance=1e-9))
    _, obj = qp_dual(K, y, C)
    assert abs(svm.dual_objective(m.alphas, K, y) - obj) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30), C=st.floats(0.01, 100))
def test_feasibility_and_monotone_objective(seed, n, C):
    K, y, _ = problem(seed, n)
    m = svm.train(K, y, TrainConfig(C=C))
    assert np.all(m.alphas >= 0) and np.all(m.alphas <= C)
    assert abs(m.alphas @ y) <= 1e-6
    h = np.array(m.objective_history)
    assert np.all(np.diff(h) <= 1e-12)
    assert m.converged


def test_duplicated_dataset_keeps_decision_function():
    K, y, P = problem(3, 10, sigma=0.5)
    rng = np.random.default_rng(0)
    T = rng.normal(size=(6, 3))
    base = svm.train(K, y, TrainConfig(C=1.0, tolerance=1e-10))
    # every point twice shares one budget of C between the two copies
    idx = np.repeat(np.arange(10), 2)
    dup = svm.train(K[np.ix_(idx, idx)], y[idx], TrainConfig(C=0.5, tolerance=1e-10))
    f0 = svm.decision_function(base, rbf_gram(T, P, 0.5))
    f1 = svm.decision_function(dup, rbf_gram(T, P[idx], 0.5))
    np.testing.assert_allclose(f0, f1, atol=1e-6)


def test_free_support_vectors_sit_on_the_margin():
    K, y, _ = problem(4, 20)
    m = svm.train(K, y, TIGHT)
    s = svm.decision_function(m, K)
    free = (m.alphas > 1e-8) & (m.alphas < m.C - 1e-8)
    assert free.any()
    bound = m.tolerance * (1 + np.abs(K @ m.dual_coef).max())
    np.testing.assert_allclose(np.abs(s[free]), 1.0, atol=max(bound, 1e-7))


def test_zero_cross_kernel_gives_bias():
    K, y, _ = problem(5, 8)
    m = svm.train(K, y)
    np.testing.assert_array_equal(svm.decision_function(m, np.zeros((3, 8))), [m.bias] * 3)


def test_label_flip_negates_scores():
    K, y, P = problem(6, 15)
    a = svm.train(K, y, TIGHT)
    b = svm.train(K, -y, TIGHT)
    Kc = rbf_gram(np.random.default_rng(1).normal(size=(5, 3)), P, 1.0)
    np.testing.assert_allclose(svm.decision_function(a, Kc), -svm.decision_function(b, Kc),
                               atol=1e-9)


def test_all_bound_bias_is_interval_midpoint():
    # C below the unconstrained optimum pins both alphas at C
    m = svm.train(np.eye(2), [1, -1], TrainConfig(C=0.1))
    np.testing.assert_array_equal(m.alphas, [0.1, 0.1])
    assert abs(m.bias) < 1e-12
    K = np.array([[1.0, 0.5], [0.5, 2.0]])
    m = svm.train(K, [1, -1], TrainConfig(C=0.1))
    g = K @ m.dual_coef * np.array([1, -1]) - 1
    # feasible rho interval is [yG of the positive, yG of the negative]; b is minus its midpoint
    assert m.bias == pytest.approx(-(g[0] * 1 + g[1] * -1) / 2)


def test_tie_goes_to_signal_and_squash():
    m = svm.SvmModel(alphas=np.zeros(2), labels=np.array([1, -1]), bias=0.0, C=1.0)
    labels, probs = svm.predict(m, np.zeros((1, 2)))
    assert labels.tolist() == [1] and probs.tolist() == [0.5]
    s = np.random.default_rng(2).normal(size=200)
    yy = np.random.default_rng(3).integers(0, 2, 200)
    sq = svm.squash(s)
    assert np.all((sq > 0) & (sq < 1))
    assert roc_auc(s, yy) == roc_auc(sq, yy)
    assert roc_auc(s, yy) == pytest.approx(pairwise_auc(s, yy), abs=1e-12)


def test_block_kernel_is_perfectly_separable():
    y = np.array([1] * 5 + [-1] * 5)
    K = (y[:, None] == y[None, :]).astype(float)
    m = svm.train(K, y)
    labels, _ = svm.predict(m, K)
    assert np.mean(labels == (y > 0)) == 1.0


def test_deterministic():
    K, y, _ = problem(8, 25)
    a, b = svm.train(K, y), svm.train(K, y)
    assert np.array_equal(a.alphas, b.alphas) and a.bias == b.bias


def test_model_file_round_trip(tmp_path):
    K, y, _ = problem(9, 14)
    km = KernelMatrix(K, "rbf", 0, 0)
    m = svm.train(km, y)
    assert m.kernel_hash == km.digest()
    svm.write_model(tmp_path / "m.txt", m)
    back = svm.read_model(tmp_path / "m.txt")
    np.testing.assert_array_equal(back.dual_coef, m.dual_coef)
    assert back.bias == m.bias and back.C == m.C and back.kernel_hash == m.kernel_hash
    np.testing.assert_array_equal(svm.decision_function(back, K), svm.decision_function(m, K))
    (tmp_path / "x").write_text("junk\n")
    with pytest.raises(ValueError):
        svm.read_model(tmp_path / "x")
