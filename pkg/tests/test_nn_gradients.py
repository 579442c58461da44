"""Analytic gradients against the central finite-difference oracle."""

import numpy as np
import pytest

from gradient_oracle import make_batch, max_relative_gradient_error
from iqautoml.nn.model import (
    Conv,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    Model,
    ModelSpec,
    SoftmaxHead,
)

TOL = 1e-4


def _head_only(w=6, n=1):
    return ModelSpec(input_shape=(w, 2, n), layers=(Flatten(), SoftmaxHead(3)))


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid", "linear"])
def test_dense_gradients_all_activations(activation):
    spec = ModelSpec(
        input_shape=(5, 2, 1),
        layers=(Flatten(), Dense(7, activation), SoftmaxHead(3)),
    )
    assert max_relative_gradient_error(spec, seed=11) < TOL


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid"])
def test_conv_gradients_all_activations(activation):
    spec = ModelSpec(
        input_shape=(20, 2, 3),
        layers=(Conv(4, 5, activation), Flatten(), SoftmaxHead(3)),
    )
    assert max_relative_gradient_error(spec, seed=23) < TOL


def test_maxpool_gradients():
    spec = ModelSpec(
        input_shape=(30, 2, 2),
        layers=(Conv(4, 4, "tanh"), MaxPool(5, 3), Flatten(), SoftmaxHead(3)),
    )
    assert max_relative_gradient_error(spec, seed=37) < TOL


def test_overlapping_maxpool_gradients():
    # stride < pool makes windows overlap; gradients must accumulate.
    spec = ModelSpec(
        input_shape=(24, 2, 1),
        layers=(Conv(3, 3, "linear"), MaxPool(6, 2), Flatten(), SoftmaxHead(3)),
    )
    assert max_relative_gradient_error(spec, seed=41) < TOL


def test_dropout_gradients_with_frozen_mask():
    spec = ModelSpec(
        input_shape=(12, 2, 2),
        layers=(Conv(4, 3, "relu"), Dropout(0.3), Flatten(), Dense(8, "tanh"), Dropout(0.4), SoftmaxHead(3)),
    )
    assert max_relative_gradient_error(spec, seed=43, training=True) < TOL


def test_softmax_head_gradients():
    assert max_relative_gradient_error(_head_only(), seed=47) < TOL


def test_full_stack_gradients():
    spec = ModelSpec(
        input_shape=(40, 2, 3),
        layers=(
            Conv(6, 7, "relu"),
            Dropout(0.15),
            MaxPool(5, 5),
            Conv(4, 3, "sigmoid"),
            Dropout(0.0),
            MaxPool(2, 2),
            Flatten(),
            Dense(10, "tanh"),
            Dropout(0.3),
            SoftmaxHead(3),
        ),
    )
    assert max_relative_gradient_error(spec, seed=53) < TOL


def test_dropout_rate_zero_matches_model_without_dropout():
    with_do = ModelSpec(
        input_shape=(16, 2, 1),
        layers=(Conv(4, 4, "relu"), Dropout(0.0), Flatten(), SoftmaxHead(3)),
    )
    without = ModelSpec(
        input_shape=(16, 2, 1),
        layers=(Conv(4, 4, "relu"), Flatten(), SoftmaxHead(3)),
    )
    x, y = make_batch(with_do, 4, seed=5)
    grads = []
    for spec in (with_do, without):
        model = Model(spec, init_seed=99, dtype=np.float64)
        model.forward(x, training=True, rng=np.random.default_rng(0))
        model.backward(y)
        grads.append([g.copy() for g in model.gradients()])
    for ga, gb in zip(*grads):
        np.testing.assert_array_equal(ga, gb)


def test_softmax_cross_entropy_closed_form():
    # For logits z and one-hot t, the logit gradient of CE is softmax(z) - t.
    rng = np.random.default_rng(61)
    spec = _head_only(w=4, n=1)
    model = Model(spec, init_seed=7, dtype=np.float64)
    x, _ = make_batch(spec, 1, seed=8)
    t = np.array([[0.0, 1.0, 0.0]])
    probs = model.forward(x)
    model.backward(t)
    head = model.head
    flat = model.layers[0].forward(
        x.reshape(1, 4, 2), training=False, rng=None
    )
    z = flat @ head.w + head.b
    softmax = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    expected_dz = softmax - t  # batch of one: no 1/B scaling difference
    np.testing.assert_allclose(head.db, expected_dz[0], atol=1e-12)
    np.testing.assert_allclose(head.dw, flat.T @ expected_dz, atol=1e-12)


def test_backward_without_forward_errors():
    model = Model(_head_only(), init_seed=1)
    with pytest.raises(RuntimeError, match="forward"):
        model.backward(np.eye(3)[:1])


def test_gradient_sweep_many_random_shapes():
    # Randomized shape fuzz over every layer type combo; mirrors the
    # acceptance gradient suite at reduced scale.
    rng = np.random.default_rng(101)
    for trial in range(12):
        w = int(rng.integers(18, 48))
        n = int(rng.integers(1, 4))
        fh = int(rng.integers(2, 8))
        filters = int(rng.integers(2, 6))
        pool = int(rng.integers(2, 5))
        stride = int(rng.integers(1, pool + 1))
        act = ("relu", "tanh", "sigmoid")[trial % 3]
        spec = ModelSpec(
            input_shape=(w, 2, n),
            layers=(
                Conv(filters, fh, act),
                Dropout(float(rng.choice([0.0, 0.3]))),
                MaxPool(pool, stride),
                Flatten(),
                Dense(int(rng.integers(4, 12)), act),
                SoftmaxHead(3),
            ),
        )
        err = max_relative_gradient_error(spec, seed=200 + trial, coords_per_tensor=4)
        assert err < TOL, f"trial {trial}: rel err {err}"
