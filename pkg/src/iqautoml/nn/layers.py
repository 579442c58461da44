"""Runtime layers: forward passes, cached state, and analytic backward passes."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Cap on im2col scratch size (elements) before the batch is processed in slices.
_COL_BLOCK_ELEMS = 16_000_000


class ShapeError(ValueError):
    """Input shape incompatible with a layer; message names the layer."""


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# name -> (f, f' expressed in terms of the cached output a = f(z))
ACTIVATIONS = {
    "relu": (_relu, lambda a: (a > 0).astype(a.dtype)),
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda a: a * (1.0 - a)),
    "linear": (lambda x: x, lambda a: np.ones_like(a)),
}


class Layer:
    """Base runtime layer. Subclasses cache what backward needs in forward."""

    name = "layer"

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def forward(self, x, training, rng):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def out_shape(self, in_shape):
        raise NotImplementedError

    def _require_cache(self, cache):
        if cache is None:
            raise RuntimeError(f"{self.name}: backward called without a cached forward pass")
        return cache


def _apply_activation(name, z):
    return ACTIVATIONS[name][0](z)


def _activation_grad(name, a):
    return ACTIVATIONS[name][1](a)


class ConvLayer(Layer):
    """Valid-padding convolution over time, stride 1, full channel depth.

    Weights are (filter_h, in_channels, filters); the width-2 component axis
    of the raw input is folded into channels before the model sees it, so the
    time axis is the only sliding dimension.
    """

    def __init__(self, filters, filter_h, activation, in_channels, rng, dtype):
        self.name = f"conv(f={filters},h={filter_h})"
        self.filters = filters
        self.filter_h = filter_h
        self.activation = activation
        fan_in = filter_h * in_channels
        fan_out = filters
        if activation == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.w = rng.uniform(-limit, limit, size=(filter_h, in_channels, filters)).astype(dtype)
        self.b = np.zeros(filters, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def out_shape(self, in_shape):
        length, channels = in_shape
        out_len = length - self.filter_h + 1
        if out_len < 1:
            raise ShapeError(
                f"{self.name}: filter taller than input ({self.filter_h} > {length})"
            )
        return (out_len, self.filters)

    def _cols(self, x, lo, hi):
        # (b, L', C, fh) view -> contiguous (b*L', fh*C)
        view = sliding_window_view(x[lo:hi], self.filter_h, axis=1)
        cols = view.transpose(0, 1, 3, 2)
        b, out_len, fh, c = cols.shape
        return np.ascontiguousarray(cols).reshape(b * out_len, fh * c), out_len

    def forward(self, x, training, rng):
        batch, length, channels = x.shape
        out_len = length - self.filter_h + 1
        if out_len < 1:
            raise ShapeError(f"{self.name}: input time axis {length} shorter than filter")
        w_flat = self.w.reshape(self.filter_h * channels, self.filters)
        out = np.empty((batch, out_len, self.filters), dtype=x.dtype)
        step = max(1, _COL_BLOCK_ELEMS // max(1, out_len * self.filter_h * channels))
        for lo in range(0, batch, step):
            hi = min(batch, lo + step)
            cols, _ = self._cols(x, lo, hi)
            out[lo:hi] = (cols @ w_flat).reshape(hi - lo, out_len, self.filters)
        out += self.b
        a = _apply_activation(self.activation, out)
        self._cache = (x, a)
        return a

    def backward(self, dout):
        x, a = self._require_cache(self._cache)
        batch, length, channels = x.shape
        dz = dout * _activation_grad(self.activation, a)
        out_len = dz.shape[1]

        w_flat = self.w.reshape(self.filter_h * channels, self.filters)
        dw_flat = np.zeros_like(w_flat, dtype=np.float64)
        self.db[...] = dz.sum(axis=(0, 1))

        # dx is the full correlation of dz with the time-reversed filters.
        pad = self.filter_h - 1
        dz_pad = np.pad(dz, ((0, 0), (pad, pad), (0, 0)))
        w_rot = self.w[::-1].transpose(0, 2, 1).reshape(self.filter_h * self.filters, channels)
        dx = np.empty_like(x)

        step = max(1, _COL_BLOCK_ELEMS // max(1, out_len * self.filter_h * channels))
        for lo in range(0, batch, step):
            hi = min(batch, lo + step)
            cols, _ = self._cols(x, lo, hi)
            dz_flat = dz[lo:hi].reshape((hi - lo) * out_len, self.filters)
            dw_flat += cols.T @ dz_flat

            view = sliding_window_view(dz_pad[lo:hi], self.filter_h, axis=1)
            cols2 = np.ascontiguousarray(view.transpose(0, 1, 3, 2))
            cols2 = cols2.reshape((hi - lo) * length, self.filter_h * self.filters)
            dx[lo:hi] = (cols2 @ w_rot).reshape(hi - lo, length, channels)

        self.dw[...] = dw_flat.reshape(self.w.shape).astype(self.w.dtype)
        return dx


class DenseLayer(Layer):
    def __init__(self, units, activation, in_features, rng, dtype):
        self.name = f"dense({units})"
        self.units = units
        self.activation = activation
        if activation == "relu":
            limit = np.sqrt(6.0 / in_features)
        else:
            limit = np.sqrt(6.0 / (in_features + units))
        self.w = rng.uniform(-limit, limit, size=(in_features, units)).astype(dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def out_shape(self, in_shape):
        (features,) = in_shape
        if features != self.w.shape[0]:
            raise ShapeError(f"{self.name}: expected {self.w.shape[0]} features, got {features}")
        return (self.units,)

    def forward(self, x, training, rng):
        if x.shape[1] != self.w.shape[0]:
            raise ShapeError(
                f"{self.name}: expected {self.w.shape[0]} features, got {x.shape[1]}"
            )
        a = _apply_activation(self.activation, x @ self.w + self.b)
        self._cache = (x, a)
        return a

    def backward(self, dout):
        x, a = self._require_cache(self._cache)
        dz = dout * _activation_grad(self.activation, a)
        self.dw[...] = x.T @ dz
        self.db[...] = dz.sum(axis=0)
        return dz @ self.w.T


class SoftmaxHeadLayer(Layer):
    """Affine projection to class logits plus a softmax, fused with the loss.

    backward takes one-hot labels directly: for mean categorical
    cross-entropy the logit gradient is (softmax(z) - t) / batch.
    """

    def __init__(self, units, in_features, rng, dtype):
        self.name = f"softmax_head({units})"
        self.units = units
        limit = np.sqrt(6.0 / (in_features + units))
        self.w = rng.uniform(-limit, limit, size=(in_features, units)).astype(dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def out_shape(self, in_shape):
        (features,) = in_shape
        if features != self.w.shape[0]:
            raise ShapeError(f"{self.name}: expected {self.w.shape[0]} features, got {features}")
        return (self.units,)

    def forward(self, x, training, rng):
        if x.shape[1] != self.w.shape[0]:
            raise ShapeError(
                f"{self.name}: expected {self.w.shape[0]} features, got {x.shape[1]}"
            )
        z = x @ self.w + self.b
        z_max = z.max(axis=1, keepdims=True)
        log_probs = z - z_max - np.log(np.exp(z - z_max).sum(axis=1, keepdims=True))
        probs = np.exp(log_probs)
        self._cache = (x, probs, log_probs)
        return probs

    def log_probs(self):
        _, _, log_probs = self._require_cache(self._cache)
        return log_probs

    def backward(self, labels):
        x, probs, _ = self._require_cache(self._cache)
        dz = (probs - labels) / labels.shape[0]
        dz = dz.astype(x.dtype)
        self.dw[...] = x.T @ dz
        self.db[...] = dz.sum(axis=0)
        return dz @ self.w.T


class MaxPoolLayer(Layer):
    """Max pooling along the time axis only: window (pool, 1), stride (stride, 1)."""

    def __init__(self, pool, stride):
        self.name = f"maxpool(p={pool},s={stride})"
        self.pool = pool
        self.stride = stride
        self._cache = None

    def out_shape(self, in_shape):
        length, channels = in_shape
        if length < self.pool:
            raise ShapeError(f"{self.name}: pool {self.pool} exceeds time axis {length}")
        return ((length - self.pool) // self.stride + 1, channels)

    def forward(self, x, training, rng):
        batch, length, channels = x.shape
        if length < self.pool:
            raise ShapeError(f"{self.name}: pool {self.pool} exceeds time axis {length}")
        windows = sliding_window_view(x, self.pool, axis=1)[:, :: self.stride]
        arg = windows.argmax(axis=3)
        out = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
        self._cache = (x.shape, arg)
        return out

    def backward(self, dout):
        in_shape, arg = self._require_cache(self._cache)
        batch, length, channels = in_shape
        out_len = arg.shape[1]
        starts = np.arange(out_len) * self.stride
        t_idx = starts[None, :, None] + arg  # (b, out_len, c) source time index
        b_idx = np.arange(batch)[:, None, None]
        c_idx = np.arange(channels)[None, None, :]
        flat = (b_idx * length + t_idx) * channels + c_idx
        # Overlapping windows may hit one cell twice; bincount accumulates.
        dx = np.bincount(
            flat.ravel(), weights=dout.ravel().astype(np.float64), minlength=batch * length * channels
        )
        return dx.reshape(in_shape).astype(dout.dtype)


class DropoutLayer(Layer):
    """Inverted dropout; identity at rate 0 and in inference mode."""

    def __init__(self, rate):
        self.name = f"dropout({rate})"
        self.rate = rate
        self._cache = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, training, rng):
        if not training or self.rate == 0.0:
            self._cache = (None,)
            return x
        if rng is None:
            raise RuntimeError(f"{self.name}: training-mode forward needs an rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
        self._cache = (mask,)
        return x * mask

    def backward(self, dout):
        (mask,) = self._require_cache(self._cache)
        if mask is None:
            return dout
        return dout * mask


class FlattenLayer(Layer):
    name = "flatten"

    def __init__(self):
        self._cache = None

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training, rng):
        self._cache = (x.shape,)
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        (shape,) = self._require_cache(self._cache)
        return dout.reshape(shape)
