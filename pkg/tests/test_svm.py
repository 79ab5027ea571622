import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drowsiness import synth
from drowsiness.svm import (
    ConvergenceError,
    Kernel,
    ModelFormatError,
    SvmError,
    TrainConfig,
    classify_eye_state,
    dumps,
    fit,
    kkt_residual,
    loads,
    train,
)

XOR_X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float)
XOR_Y = np.array([-1, -1, 1, 1], float)


def test_kernel_values():
    assert Kernel.linear()([1, 0], [1, 0]) == 1
    assert Kernel.rbf(0.37)([3, -2], [3, -2]) == 1
    assert Kernel.polynomial(2, 1.0)([1, 2], [3, 4]) == 144
    assert Kernel.quadratic(0.0)([1, 1], [2, 0]) == 4


@pytest.mark.parametrize("k", [Kernel.linear(), Kernel.quadratic(0.5), Kernel.polynomial(4, 2.0), Kernel.rbf(0.25)])
def test_kernel_spec_round_trip(k):
    assert Kernel.parse(k.spec()) == k


def test_kernel_spec_errors():
    for bad in ("cubic", "polynomial:3", "rbf:x", "linear:1"):
        with pytest.raises(ModelFormatError):
            Kernel.parse(bad)
    with pytest.raises(ValueError):
        Kernel.rbf(0.0)


def test_two_point_problem():
    m, alphas = fit([[-1.0], [1.0]], [-1, 1], Kernel.linear(), TrainConfig(C=1e6))
    assert m.weight_vector()[0] == pytest.approx(1.0, abs=1e-3)
    assert m.b == pytest.approx(0.0, abs=1e-3)
    assert np.allclose(alphas, 0.5, atol=1e-3)
    assert m.decision([0.0]) == pytest.approx(0.0, abs=1e-3)
    assert m.decision([1.0]) == pytest.approx(1.0, abs=1e-2)
    assert m.classify([0.5]) == 1 and m.classify([-0.5]) == -1


def test_zero_decision_is_open():
    m = train([[-1.0], [1.0]], [-1, 1], Kernel.linear(), TrainConfig(C=1e6))
    from dataclasses import replace

    exact = replace(m, b=0.0, alpha=np.array([0.5, 0.5]))
    assert exact.decision([0.0]) == 0.0
    assert exact.classify([0.0]) == 1
    assert classify_eye_state(exact, [0.0]) == "open"


def test_xor_needs_a_nonlinear_kernel():
    lin = train(XOR_X, XOR_Y, Kernel.linear(), TrainConfig(C=100))
    assert np.mean(lin.classify(XOR_X) == XOR_Y) <= 0.75
    poly = train(XOR_X, XOR_Y, Kernel.polynomial(2, 1.0), TrainConfig(C=100))
    assert np.mean(poly.classify(XOR_X) == XOR_Y) == 1.0


def _blobs(rng, n=40, gap=3.0, d=3):
    X = np.vstack([rng.normal(gap / 2, 1, (n, d)), rng.normal(-gap / 2, 1, (n, d))])
    return X, np.r_[np.ones(n), -np.ones(n)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["linear", "quadratic:1", "polynomial:3:1", "rbf:0.5"]), st.sampled_from([0.1, 1.0, 10.0]))
def test_training_invariants(seed, spec, C):
    rng = np.random.default_rng(seed)
    X, y = _blobs(rng, n=25, gap=1.5)
    cfg = TrainConfig(C=C)
    m, alphas = fit(X, y, Kernel.parse(spec), cfg)
    assert abs(float(alphas @ y)) <= 1e-6
    assert np.all(m.alpha > 0) and np.all(m.alpha <= C + 1e-12)
    assert kkt_residual(m, X, y, alphas) <= 2 * cfg.tolerance


def test_separable_hard_margin(rng):
    X, y = _blobs(rng, gap=8.0)
    m, alphas = fit(X, y, Kernel.linear(), TrainConfig(C=1e4))
    assert (m.classify(X) == y).all()
    free = (alphas > 1e-8) & (alphas < 1e4 - 1e-8)
    assert free.any()
    assert np.abs(m.decision(X[free]) - y[free]).max() <= 0.05
    w = m.weight_vector()
    probes = rng.normal(0, 3, (100, 3))
    assert np.allclose(m.decision(probes), probes @ w + m.b, atol=1e-9)


def test_duplicates_and_permutations_leave_decisions_unchanged(rng):
    X, y = _blobs(rng, gap=2.0)
    probes = rng.normal(0, 2, (100, 3))
    k, cfg = Kernel.polynomial(3, 1.0), TrainConfig(C=1.0, tolerance=1e-6)
    base = train(X, y, k, cfg).decision(probes)
    perm = rng.permutation(len(y))
    assert np.allclose(train(X[perm], y[perm], k, cfg).decision(probes), base, atol=1e-6)
    doubled = train(np.vstack([X, X]), np.r_[y, y], k, TrainConfig(C=0.5, tolerance=1e-6)).decision(probes)
    # each copy carries half the multiplier, so the box must halve too
    assert np.allclose(doubled, base, atol=1e-6 * max(1.0, np.abs(base).max()))


def test_decision_is_continuous(rng):
    X, y = _blobs(rng)
    m = train(X, y, Kernel.rbf(0.5))
    x = rng.normal(size=3)
    assert abs(m.decision(x) - m.decision(x + 1e-7)) < 1e-4


def test_input_checks():
    with pytest.raises(SvmError):
        train([[0.0], [1.0]], [1, 1])
    with pytest.raises(SvmError):
        train([[0.0], [1.0]], [1, 0])
    with pytest.raises(ValueError):
        TrainConfig(C=0)


def test_iteration_cap_reports_best_effort_model(rng):
    X, y = _blobs(rng, gap=0.5)
    with pytest.raises(ConvergenceError) as info:
        train(X, y, Kernel.rbf(1.0), TrainConfig(max_passes=2))
    assert info.value.model.sv.shape[1] == 3


def test_model_file_round_trip(rng):
    X, y = _blobs(rng)
    for std in (False, True):
        m = train(X, y, Kernel.polynomial(), standardize=std)
        again = loads(dumps(m))
        probes = rng.normal(0, 2, (100, 3))
        assert np.allclose(again.decision(probes), m.decision(probes), atol=1e-9)
    with pytest.raises(ModelFormatError):
        loads("SVM v1 3 linear 1 0 2\n1 1 0 0 0\n")
    with pytest.raises(ModelFormatError):
        loads(dumps(m).replace("MEAN", "MEDIAN"))


def test_eye_state_on_weight_clusters():
    rng = np.random.default_rng(1)
    X, y = synth.weight_clusters(60, 40, rng)
    m = train(X, y, Kernel.polynomial(), standardize=True)
    assert classify_eye_state(m, X[y > 0].mean(axis=0)) == "open"
    assert classify_eye_state(m, X[y < 0].mean(axis=0)) == "closed"
