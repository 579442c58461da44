"""Central finite-difference gradient oracle shared by the NN test modules.

The oracle is independent of the analytic backward path: it re-runs the
forward pass with individually perturbed parameters (h = 1e-5, float64) and
compares the resulting loss slope against the recorded analytic gradient.
"""

import numpy as np

from iqautoml.nn.model import Model, ModelSpec


def make_batch(spec: ModelSpec, batch: int, seed: int):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch, *spec.input_shape))
    y = np.eye(spec.layers[-1].units)[rng.integers(0, spec.layers[-1].units, batch)]
    return x, y


def max_relative_gradient_error(
    spec: ModelSpec,
    *,
    batch: int = 3,
    seed: int = 0,
    coords_per_tensor: int = 6,
    h: float = 1e-5,
    training: bool = True,
) -> float:
    """Largest relative error between analytic and finite-difference gradients.

    Every forward pass reseeds the dropout rng identically, so the loss is a
    deterministic function of the parameters even in training mode.
    """
    model = Model(spec, init_seed=seed + 1, dtype=np.float64)
    x, y = make_batch(spec, batch, seed + 2)

    def loss_value() -> float:
        model.forward(x, training=training, rng=np.random.default_rng(seed + 3))
        return model.loss(y)

    loss_value()
    model.backward(y)
    analytic = [g.copy() for g in model.gradients()]

    coord_rng = np.random.default_rng(seed + 4)
    worst = 0.0
    for tensor, grad in zip(model.parameters(), analytic):
        flat = tensor.reshape(-1)
        count = min(coords_per_tensor, flat.size)
        idx = coord_rng.choice(flat.size, size=count, replace=False)
        for i in idx:
            original = flat[i]
            flat[i] = original + h
            up = loss_value()
            flat[i] = original - h
            down = loss_value()
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            a = grad.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-5)
            worst = max(worst, err)
    return worst
