"""Model descriptors (serializable) and the runtime Model that realizes them.

A ModelSpec is an ordered layer list over an input of shape (w, 2, n). Conv
stride is fixed at (1, 1) and padding is always valid; the width-2 component
axis collapses after the first convolution, so shape feasibility is tracked
along the time axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iqautoml.nn.layers import (
    ACTIVATIONS,
    ConvLayer,
    DenseLayer,
    DropoutLayer,
    FlattenLayer,
    MaxPoolLayer,
    ShapeError,
    SoftmaxHeadLayer,
)


class ModelSpecError(ValueError):
    """Layer list cannot form a valid model; message names the first bad layer."""


@dataclass(frozen=True)
class Conv:
    filters: int
    filter_h: int
    activation: str = "relu"


@dataclass(frozen=True)
class Dropout:
    rate: float


@dataclass(frozen=True)
class MaxPool:
    pool: int
    stride: int


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "relu"


@dataclass(frozen=True)
class SoftmaxHead:
    units: int = 3


_KIND_BY_TYPE = {
    Conv: "conv",
    Dropout: "dropout",
    MaxPool: "maxpool",
    Flatten: "flatten",
    Dense: "dense",
    SoftmaxHead: "softmax_head",
}
_TYPE_BY_KIND = {v: k for k, v in _KIND_BY_TYPE.items()}


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]  # (w, 2, n)
    layers: tuple

    def validate(self, num_classes: int = 3) -> None:
        """Check shape chaining, layer ordering, and the 3-way softmax head."""
        w, comps, n = self.input_shape
        if w < 1 or comps != 2 or n < 1:
            raise ModelSpecError(f"input shape must be (w, 2, n), got {self.input_shape}")
        if not self.layers:
            raise ModelSpecError("model needs at least one layer")
        for shape in self.shape_trace():  # raises on any dimension < 1
            pass
        if not isinstance(self.layers[-1], SoftmaxHead):
            raise ModelSpecError("final layer must be a SoftmaxHead")
        if self.layers[-1].units != num_classes:
            raise ModelSpecError(
                f"head emits {self.layers[-1].units} classes, expected {num_classes}"
            )
        for i, layer in enumerate(self.layers[:-1]):
            if isinstance(layer, SoftmaxHead):
                raise ModelSpecError(f"layer {i}: SoftmaxHead before the end of the model")

    def shape_trace(self) -> list[tuple]:
        """Shapes after each layer in public (time, width, channels) terms.

        Raises ModelSpecError at the first layer whose output would have a
        dimension below 1 or whose input rank is wrong.
        """
        w, comps, n = self.input_shape
        shape: tuple = (w, comps, n)
        flat = False
        trace = []
        for i, layer in enumerate(self.layers):
            where = f"layer {i} ({type(layer).__name__})"
            if isinstance(layer, Conv):
                if flat:
                    raise ModelSpecError(f"{where}: conv after flatten")
                length, width, channels = shape
                out_len = length - layer.filter_h + 1
                if out_len < 1:
                    raise ModelSpecError(
                        f"{where}: time axis {length} shorter than filter {layer.filter_h}"
                    )
                if layer.activation not in ACTIVATIONS:
                    raise ModelSpecError(f"{where}: unknown activation {layer.activation!r}")
                # The filter spans the full remaining width, collapsing it to 1.
                shape = (out_len, 1, layer.filters)
            elif isinstance(layer, MaxPool):
                if flat:
                    raise ModelSpecError(f"{where}: pool after flatten")
                length, width, channels = shape
                if layer.pool < 1 or layer.stride < 1:
                    raise ModelSpecError(f"{where}: pool and stride must be positive")
                if length < layer.pool:
                    raise ModelSpecError(
                        f"{where}: pool {layer.pool} exceeds time axis {length}"
                    )
                shape = ((length - layer.pool) // layer.stride + 1, width, channels)
            elif isinstance(layer, Dropout):
                if not 0.0 <= layer.rate < 1.0:
                    raise ModelSpecError(f"{where}: dropout rate {layer.rate} outside [0, 1)")
            elif isinstance(layer, Flatten):
                if flat:
                    raise ModelSpecError(f"{where}: repeated flatten")
                flat = True
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, (Dense, SoftmaxHead)):
                if not flat:
                    raise ModelSpecError(f"{where}: dense layer before flatten")
                units = layer.units
                if units < 1:
                    raise ModelSpecError(f"{where}: units must be positive")
                if isinstance(layer, Dense) and layer.activation not in ACTIVATIONS:
                    raise ModelSpecError(f"{where}: unknown activation {layer.activation!r}")
                shape = (units,)
            else:
                raise ModelSpecError(f"{where}: unknown layer kind")
            trace.append(shape)
        return trace

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            entry = {"kind": _KIND_BY_TYPE[type(layer)]}
            entry.update(vars(layer))
            layers.append(entry)
        return {"input_shape": list(self.input_shape), "layers": layers}

    @staticmethod
    def from_dict(data: dict) -> "ModelSpec":
        layers = []
        for entry in data["layers"]:
            entry = dict(entry)
            cls = _TYPE_BY_KIND[entry.pop("kind")]
            layers.append(cls(**entry))
        return ModelSpec(input_shape=tuple(data["input_shape"]), layers=tuple(layers))


class Model:
    """Runtime realization of a ModelSpec with analytic gradients.

    float32 by default for training speed; pass dtype=np.float64 for
    gradient checking.
    """

    def __init__(self, spec: ModelSpec, *, init_seed: int = 0, dtype=np.float32):
        spec.validate(num_classes=spec.layers[-1].units)
        self.spec = spec
        self.dtype = dtype
        w, comps, n = spec.input_shape
        self.in_channels = comps * n

        rng = np.random.default_rng(np.random.SeedSequence([init_seed & ((1 << 64) - 1), 0xC0]))
        self.layers = []
        shape: tuple = (w, self.in_channels)
        for layer in spec.layers:
            if isinstance(layer, Conv):
                built = ConvLayer(
                    layer.filters, layer.filter_h, layer.activation, shape[1], rng, dtype
                )
            elif isinstance(layer, MaxPool):
                built = MaxPoolLayer(layer.pool, layer.stride)
            elif isinstance(layer, Dropout):
                built = DropoutLayer(layer.rate)
            elif isinstance(layer, Flatten):
                built = FlattenLayer()
            elif isinstance(layer, Dense):
                built = DenseLayer(layer.units, layer.activation, shape[0], rng, dtype)
            else:
                built = SoftmaxHeadLayer(layer.units, shape[0], rng, dtype)
            shape = built.out_shape(shape)
            self.layers.append(built)
        self._forward_done = False

    @property
    def head(self) -> SoftmaxHeadLayer:
        return self.layers[-1]

    def _fold_input(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=self.dtype)
        expected = tuple(self.spec.input_shape)
        if batch.ndim != 4 or batch.shape[1:] != expected:
            raise ShapeError(
                f"input: expected batch of shape (B, {expected[0]}, {expected[1]}, "
                f"{expected[2]}), got {batch.shape}"
            )
        return batch.reshape(batch.shape[0], expected[0], self.in_channels)

    def forward(self, batch, training: bool = False, rng=None) -> np.ndarray:
        """Class probabilities, one row per input. Dropout is off unless training."""
        x = self._fold_input(batch)
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        self._forward_done = True
        return x

    def loss(self, labels) -> float:
        """Mean categorical cross-entropy against the cached forward pass."""
        if not self._forward_done:
            raise RuntimeError("loss requires a forward pass first")
        log_probs = self.head.log_probs()
        labels = np.asarray(labels)
        return float(-(labels * log_probs).sum() / labels.shape[0])

    def backward(self, labels) -> None:
        """Populate parameter gradients for mean cross-entropy on the cached batch."""
        if not self._forward_done:
            raise RuntimeError("backward called without a cached forward pass")
        grad = self.head.backward(np.asarray(labels, dtype=self.dtype))
        for layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def get_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(weights) != len(params):
            raise ValueError(f"expected {len(params)} arrays, got {len(weights)}")
        for p, w in zip(params, weights):
            if p.shape != w.shape:
                raise ValueError(f"weight shape mismatch: {p.shape} vs {w.shape}")
            p[...] = w
