"""SGD, RMSProp, and Adam parameter updates with serializable state."""

from __future__ import annotations

import numpy as np


class NonFiniteGradients(RuntimeError):
    """A gradient contained NaN/Inf; the trial must abort with diagnostics."""


class Optimizer:
    kind = "base"

    def __init__(self, lr: float, params: list[np.ndarray]):
        self.lr = lr
        self.t = 0
        self._init_slots(params)

    def _init_slots(self, params):
        self.slots: list[list[np.ndarray]] = []

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """One in-place update over all parameters; bumps the step counter by 1."""
        for i, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradients(
                    f"{self.kind}: non-finite gradient in tensor {i} at step {self.t + 1}"
                )
        self.t += 1
        self._update(params, grads)

    def _update(self, params, grads):
        raise NotImplementedError

    def state_arrays(self) -> list[np.ndarray]:
        return [arr for group in self.slots for arr in group]

    def load_state_arrays(self, arrays: list[np.ndarray]) -> None:
        flat = self.state_arrays()
        if len(arrays) != len(flat):
            raise ValueError(f"expected {len(flat)} state arrays, got {len(arrays)}")
        for dst, src in zip(flat, arrays):
            dst[...] = src


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class RMSProp(Optimizer):
    kind = "rmsprop"
    decay = 0.9
    eps = 1e-8

    def _init_slots(self, params):
        self.slots = [[np.zeros_like(p) for p in params]]

    def _update(self, params, grads):
        (sq,) = self.slots
        for p, g, s in zip(params, grads, sq):
            s *= self.decay
            s += (1.0 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(s) + self.eps)


class Adam(Optimizer):
    kind = "adam"
    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def _init_slots(self, params):
        self.slots = [
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
        ]

    def _update(self, params, grads):
        m_slots, v_slots = self.slots
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, m_slots, v_slots):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


_KINDS = {"sgd": SGD, "rmsprop": RMSProp, "adam": Adam}


def make_optimizer(kind: str, lr: float, params: list[np.ndarray]) -> Optimizer:
    key = kind.lower()
    if key not in _KINDS:
        raise ValueError(f"unknown optimizer {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[key](lr, params)
