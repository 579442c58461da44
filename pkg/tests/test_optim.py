"""Optimizer updates: SGD, RMSProp, and bias-corrected Adam."""

import numpy as np
import pytest

from iqautoml.nn.optim import NonFiniteGradients, make_optimizer


def _params(value=1.0):
    return [np.array([value], dtype=np.float64)]


def test_sgd_example():
    p = _params(1.0)
    opt = make_optimizer("sgd", 0.1, p)
    opt.step(p, [np.array([0.5])])
    np.testing.assert_allclose(p[0], [0.95])


def test_adam_first_step_scalar():
    # Hand evaluation: with bias correction the first step is
    # -lr * g / (|g| + eps) = -1e-3 * 0.1 / (0.1 + 1e-8) ~= -9.99999e-4.
    p = _params(0.0)
    opt = make_optimizer("adam", 1e-3, p)
    opt.step(p, [np.array([0.1])])
    expected = -1e-3 * 0.1 / (0.1 + 1e-8)
    np.testing.assert_allclose(p[0], [expected], rtol=1e-9)
    assert abs(p[0][0] + 9.99999e-4) < 1e-9


def test_rmsprop_first_step():
    # s = 0.1 * g^2 after one step, so dp = -lr * g / (sqrt(0.1)*|g| + eps).
    p = _params(0.0)
    opt = make_optimizer("rmsprop", 1e-2, p)
    g = 0.5
    opt.step(p, [np.array([g])])
    expected = -1e-2 * g / (np.sqrt(0.1 * g * g) + 1e-8)
    np.testing.assert_allclose(p[0], [expected], rtol=1e-9)


@pytest.mark.parametrize("kind", ["sgd", "adam", "rmsprop"])
def test_zero_gradient_leaves_params_unchanged(kind):
    p = [np.array([1.5, -2.0]), np.array([[0.25]])]
    opt = make_optimizer(kind, 0.1, p)
    before = [a.copy() for a in p]
    opt.step(p, [np.zeros_like(a) for a in p])
    for a, b in zip(p, before):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["sgd", "adam", "rmsprop"])
def test_step_counter_increments(kind):
    p = _params()
    opt = make_optimizer(kind, 0.01, p)
    for expected in range(1, 4):
        opt.step(p, [np.array([0.1])])
        assert opt.t == expected


def test_nan_gradient_aborts():
    p = _params()
    opt = make_optimizer("adam", 0.01, p)
    with pytest.raises(NonFiniteGradients):
        opt.step(p, [np.array([np.nan])])
    # the failed step must not advance the counter
    assert opt.t == 0


def test_adam_bias_correction_trajectory():
    # Compare three steps against an explicit reimplementation.
    p = _params(1.0)
    opt = make_optimizer("adam", 0.05, p)
    grads = [0.3, -0.2, 0.7]
    ref = 1.0
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        opt.step(p, [np.array([g])])
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(p[0], [ref], rtol=1e-12)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        make_optimizer("adagrad", 0.1, _params())


def test_state_array_roundtrip():
    p = [np.arange(4, dtype=np.float32).reshape(2, 2)]
    opt = make_optimizer("adam", 0.01, p)
    opt.step(p, [np.ones((2, 2), dtype=np.float32)])
    saved = [a.copy() for a in opt.state_arrays()]
    p2 = [p[0].copy()]
    opt2 = make_optimizer("adam", 0.01, p2)
    opt2.t = opt.t
    opt2.load_state_arrays(saved)
    opt.step(p, [np.full((2, 2), 0.5, dtype=np.float32)])
    opt2.step(p2, [np.full((2, 2), 0.5, dtype=np.float32)])
    np.testing.assert_array_equal(p[0], p2[0])
