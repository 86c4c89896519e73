import numpy as np
import pytest

from qsvmcs import kernel as kn
from qsvmcs import statevec as sv
from qsvmcs.encoders import STRATEGIES, EncoderSpec
from qsvmcs.svm import TrainConfig, train

SPB = EncoderSpec()


def feats(rng, k=3, n=1):
    out = [np.column_stack([rng.uniform(0, np.pi, k), rng.uniform(0, np.pi, k),
                            rng.uniform(0, 2 * np.pi, k)]).reshape(-1) for _ in range(n)]
    return out if n > 1 else out[0]


def test_identical_inputs():
    x = feats(np.random.default_rng(0))
    assert kn.kernel_exact(x, x, SPB) == pytest.approx(1.0, abs=1e-12)
    assert kn.kernel_sampled(x, x, SPB, shots=1000, seed=1) == 1.0


def test_length_mismatch_and_bad_shots():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        kn.kernel_exact(feats(rng, 2), feats(rng, 3), SPB)
    x = feats(rng)
    with pytest.raises(ValueError):
        kn.kernel_sampled(x, x, SPB, shots=0)


def test_sampled_is_reproducible():
    rng = np.random.default_rng(2)
    a, b = feats(rng), feats(rng)
    assert kn.kernel_sampled(a, b, SPB, 512, 9) == kn.kernel_sampled(a, b, SPB, 512, 9)


def test_sampled_within_binomial_bound_at_8192():
    rng = np.random.default_rng(3)
    for s in range(5):
        a, b = feats(rng), feats(rng)
        k = kn.kernel_exact(a, b, SPB)
        est = kn.kernel_sampled(a, b, SPB, 8192, s)
        assert abs(est - k) <= 5 * np.sqrt(k * (1 - k) / 8192) + 1e-12


@pytest.mark.parametrize("spec", [EncoderSpec(s, 2) for s in STRATEGIES], ids=lambda s: s.tag)
def test_exact_matches_sampled_million_shots(spec):
    rng = np.random.default_rng(4)
    shots = 10**6
    for s in range(10):
        a, b = feats(rng, 2), feats(rng, 2)
        k = kn.kernel_exact(a, b, spec)
        est = kn.kernel_sampled(a, b, spec, shots, s)
        assert abs(est - k) <= 5 * np.sqrt(k * (1 - k) / shots) + 1e-9


def test_convergence_at_1e5_over_20_pairs():
    rng = np.random.default_rng(5)
    for s in range(20):
        a, b = feats(rng), feats(rng)
        k = kn.kernel_exact(a, b, SPB)
        est = kn.kernel_sampled(a, b, SPB, 10**5, s)
        assert abs(est - k) <= 5 * np.sqrt(k * (1 - k) / 10**5) + 1e-9


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_adjoint_returns_to_zero(strategy):
    rng = np.random.default_rng(6)
    x = feats(rng)
    c = kn.kernel_circuit(x, x, EncoderSpec(strategy))
    assert abs(sv.probabilities(sv.simulate(c))[0] - 1) < 1e-10


def test_circuit_probability_matches_inner_product():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b = feats(rng), feats(rng)
        p0 = sv.probabilities(sv.simulate(kn.kernel_circuit(a, b, SPB)))[0]
        assert abs(p0 - kn.kernel_exact(a, b, SPB)) < 1e-10


def test_monotone_shot_convergence():
    rng = np.random.default_rng(8)
    pairs = [(feats(rng), feats(rng)) for _ in range(10)]
    exact = np.array([kn.kernel_exact(a, b, SPB) for a, b in pairs])
    errs = []
    for shots in (10**2, 10**4, 10**6):
        est = np.array([kn.kernel_sampled(a, b, SPB, shots, i) for i, (a, b) in enumerate(pairs)])
        errs.append(np.abs(est - exact).mean())
    assert errs[0] > errs[1] > errs[2]


def test_gram_single_point():
    km = kn.gram_matrix([feats(np.random.default_rng(9))], SPB)
    assert km.entries.tolist() == [[1.0]]


def test_exact_gram_symmetric_psd_and_bounded():
    rng = np.random.default_rng(10)
    X = feats(rng, 3, 50)
    k = kn.gram_matrix(X, SPB).entries
    assert np.array_equal(k, k.T)
    assert np.all(np.diag(k) == 1.0)
    assert k.min() >= -1e-10 and k.max() <= 1 + 1e-10
    assert np.linalg.eigvalsh(k)[0] >= -1e-8
    with pytest.raises(ValueError):
        kn.gram_matrix([], SPB)


def test_exact_gram_matches_pairwise():
    rng = np.random.default_rng(11)
    X = feats(rng, 2, 5)
    k = kn.gram_matrix(X, EncoderSpec("combinatorial")).entries
    for i in range(5):
        for j in range(i + 1, 5):
            assert abs(k[i, j] - kn.kernel_exact(X[i], X[j], EncoderSpec("combinatorial"))) < 1e-12


def test_sampled_gram_is_exactly_symmetric_and_worker_independent():
    rng = np.random.default_rng(12)
    X = feats(rng, 2, 6)
    a = kn.gram_matrix(X, SPB, shots=256, seed=3)
    b = kn.gram_matrix(X, SPB, shots=256, seed=3, workers=2)
    assert np.array_equal(a.entries, a.entries.T)
    assert np.array_equal(a.entries, b.entries)
    assert a.shots == 256 and a.seed == 3 and a.encoder == SPB.tag


def test_cross_gram():
    rng = np.random.default_rng(13)
    X = feats(rng, 3, 6)
    g = kn.gram_matrix(X, SPB).entries
    c = kn.cross_gram(X, X, SPB).entries
    assert np.abs(g - c).max() < 1e-12
    T = feats(rng, 3, 2) + [X[4]]
    c = kn.cross_gram(T, X, SPB).entries
    assert c.shape == (3, 6)
    assert c[2, 4] == pytest.approx(1.0, abs=1e-12)
    assert c.min() >= 0 and c.max() <= 1 + 1e-12
    s = kn.cross_gram(T, X, SPB, shots=128, seed=1).entries
    assert s.shape == (3, 6) and s[2, 4] == 1.0
    with pytest.raises(ValueError):
        kn.cross_gram([], X, SPB)


def test_rbf():
    x = np.array([0.1, 0.2, 0.3])
    assert kn.rbf_kernel(x, x, 1.0) == 1.0
    sigma = 0.7
    d = np.array([1.0, 0.0, 0.0]) * sigma * np.sqrt(2)
    assert kn.rbf_kernel(x, x + d, sigma) == pytest.approx(np.exp(-1))
    with pytest.raises(ValueError):
        kn.rbf_kernel(x, x, 0.0)
    rng = np.random.default_rng(14)
    P = rng.uniform(0, np.pi, (40, 9))
    k = kn.rbf_gram(P, P, 1.3)
    assert np.linalg.eigvalsh(k)[0] >= -1e-10
    assert k[3, 7] == pytest.approx(kn.rbf_kernel(P[3], P[7], 1.3))


def test_indefinite_sampled_counterexample_engages_regularization():
    # three nearby points sampled with 16 shots: the estimates break PSD
    x = np.random.default_rng(0).uniform(0, np.pi, 6)
    X = [x, x + 0.15, x + 0.3]
    spec = EncoderSpec("bloch", 1)
    km = kn.gram_matrix(X, spec, shots=16, seed=0)
    assert np.linalg.eigvalsh(km.entries)[0] < -1e-3
    fixed = kn.regularize_psd(km.entries)
    assert np.linalg.eigvalsh(fixed)[0] >= 1e-8 - 1e-12
    clipped = kn.regularize_psd(km.entries, "clip")
    assert np.linalg.eigvalsh(clipped)[0] >= -1e-12
    # a solver that stops early reports non-convergence and retries on the shifted kernel
    model = train(km, [1, 1, -1], TrainConfig(max_iter=1))
    assert model.diagonal_shift > 0
    with pytest.raises(ValueError):
        kn.regularize_psd(km.entries, "bogus")


def test_binary_and_csv_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    km = kn.gram_matrix(feats(rng, 2, 4), SPB, shots=64, seed=2)
    p = tmp_path / "k.bin"
    kn.write_kernel(p, km)
    assert p.read_bytes()[:4] == b"QKM1"
    back = kn.read_kernel(p)
    assert np.array_equal(back.entries, km.entries)
    assert (back.encoder, back.shots, back.seed) == (km.encoder, 64, 2)
    assert back.digest() == km.digest()
    kn.write_kernel_csv(tmp_path / "k.csv", km)
    assert np.array_equal(np.loadtxt(tmp_path / "k.csv", delimiter=","), km.entries)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(ValueError):
        kn.read_kernel(tmp_path / "bad.bin")


def test_checkpoint_resume(tmp_path):
    rng = np.random.default_rng(16)
    X = feats(rng, 2, 6)
    ck = tmp_path / "ck"
    full = kn.gram_matrix(X, SPB, shots=100, seed=4, checkpoint=str(ck))
    data = ck.read_bytes()
    # cut mid-way through the fourth row and resume
    header = len(kn._header(kn.CHECKPOINT_MAGIC, 6, 6, 100, 4, SPB.tag))
    cut = header + sum(8 + 8 * (6 - i) for i in range(3)) + 13
    ck.write_bytes(data[:cut])
    resumed = kn.gram_matrix(X, SPB, shots=100, seed=4, checkpoint=str(ck))
    assert np.array_equal(full.entries, resumed.entries)
    assert ck.read_bytes() == data
    with pytest.raises(ValueError):
        kn.gram_matrix(X, SPB, shots=100, seed=5, checkpoint=str(ck))
