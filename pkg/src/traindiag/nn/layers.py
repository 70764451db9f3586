"""Neural-network layers with explicit forward/backward passes.

Every layer caches what its backward pass needs during a training-mode
forward; calling backward without that cache raises StaleCache. Shapes
follow the (batch, channels, length) convention for sequence layers and
(batch, features) after global average pooling.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateBatch, ShapeError, StaleCache
from . import kernels


class Parameter:
    """A trainable array and its gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape})"


class Layer:
    """Base layer: stateless by default, subclasses cache for backward."""

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Parameter]:
        return []

    def flops(self, in_shape: tuple) -> tuple[int, tuple]:
        raise NotImplementedError

    def _take_cache(self, name: str = "_cache"):
        cache = getattr(self, name, None)
        if cache is None:
            raise StaleCache(f"{type(self).__name__}.backward called without a cached forward pass")
        setattr(self, name, None)
        return cache


def _require_3d(x: np.ndarray, layer: str) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"{layer} expects (batch, channels, length), got {x.shape}")
    return x


class Conv1D(Layer):
    """1-D convolution, kernel 9 / stride 1 / padding 1 in the pipeline.

    Stride is fixed at 1; padding and kernel size are free so the decoder
    and the unit tests can use other values.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 9,
                 padding: int = 1, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_channels * kernel_size)
        self.weight = Parameter(
            "weight",
            rng.uniform(-bound, bound, (out_channels, in_channels, kernel_size)).astype(dtype),
        )
        self.bias = Parameter("bias", rng.uniform(-bound, bound, out_channels).astype(dtype))
        self._cache = None

    def forward(self, x, training=False):
        x = _require_3d(np.asarray(x), "Conv1D")
        if x.shape[1] != self.in_channels:
            raise ShapeError(
                f"Conv1D expects {self.in_channels} input channels, got input shape {x.shape}")
        if x.shape[2] + 2 * self.padding < self.kernel_size:
            raise ShapeError(
                f"input length {x.shape[2]} with padding {self.padding} shorter than kernel {self.kernel_size}")
        if self.padding:
            xp = np.zeros((x.shape[0], x.shape[1], x.shape[2] + 2 * self.padding), dtype=x.dtype)
            xp[:, :, self.padding:-self.padding] = x
        else:
            xp = np.ascontiguousarray(x)
        y = kernels.conv_gather(xp, self.weight.value, self.bias.value)
        self._cache = xp if training else None
        return y

    def backward(self, dy):
        xp = self._take_cache()
        dy = np.ascontiguousarray(dy, dtype=xp.dtype)
        k = self.kernel_size
        self.weight.grad = kernels.conv_dw(dy, xp).astype(self.weight.value.dtype)
        self.bias.grad = dy.sum(axis=(0, 2)).astype(self.bias.value.dtype)
        # input gradient: same gather with channel roles swapped and taps reversed
        w_flip = np.ascontiguousarray(self.weight.value.transpose(1, 0, 2)[:, :, ::-1])
        dyp = np.zeros((dy.shape[0], dy.shape[1], dy.shape[2] + 2 * (k - 1)), dtype=dy.dtype)
        dyp[:, :, k - 1:k - 1 + dy.shape[2]] = dy
        zero_bias = np.zeros(self.in_channels, dtype=dy.dtype)
        dxp = kernels.conv_gather(dyp, w_flip, zero_bias)
        p = self.padding
        return dxp[:, :, p:dxp.shape[2] - p] if p else dxp

    def params(self):
        return [self.weight, self.bias]

    def out_length(self, length: int) -> int:
        return length + 2 * self.padding - self.kernel_size + 1

    def flops(self, in_shape):
        channels, length = in_shape
        n_out = self.out_length(length)
        count = 2 * self.kernel_size * self.in_channels * self.out_channels * n_out \
            + self.out_channels * n_out
        return count, (self.out_channels, n_out)


class ReLU(Layer):
    """max(0, x); `inplace` clobbers the input (safe after a fresh conv)."""

    def __init__(self, inplace: bool = False):
        self.inplace = inplace
        self._cache = None

    def forward(self, x, training=False):
        mask = (x > 0) if training else None
        y = np.maximum(x, 0, out=x) if self.inplace else np.maximum(x, 0)
        self._cache = mask
        return y

    def backward(self, dy):
        mask = self._take_cache()
        return dy * mask

    def flops(self, in_shape):
        return int(np.prod(in_shape)), in_shape


class MaxPool1D(Layer):
    """Max pooling; the pipeline uses kernel 4, stride 2.

    The argmax of each window is cached for backward; ties route the
    gradient to the first maximal position.
    """

    def __init__(self, kernel_size: int = 4, stride: int = 2):
        self.kernel_size = kernel_size
        self.stride = stride
        self._cache = None

    def forward(self, x, training=False):
        x = _require_3d(np.asarray(x), "MaxPool1D")
        if x.shape[2] < self.kernel_size:
            raise ShapeError(f"input length {x.shape[2]} shorter than pool kernel {self.kernel_size}")
        y, idx = kernels.maxpool(x, self.kernel_size, self.stride)
        self._cache = (idx, x.shape[2]) if training else None
        return y

    def backward(self, dy):
        idx, length = self._take_cache()
        return kernels.maxpool_bwd(dy, idx, length)

    def out_length(self, length: int) -> int:
        return (length - self.kernel_size) // self.stride + 1

    def flops(self, in_shape):
        channels, length = in_shape
        n_out = self.out_length(length)
        return channels * n_out, (channels, n_out)


class BatchNorm1D(Layer):
    """Per-channel batch normalization over (batch, length).

    Train mode normalizes with the batch statistics and updates the
    running estimates with `momentum` (running variance uses the
    unbiased batch variance); eval mode normalizes with the running
    statistics.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=np.float32):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter("gamma", np.ones(channels, dtype=dtype))
        self.beta = Parameter("beta", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        # Until the first training batch the running stats are the 0/1
        # placeholders; seeding them from that batch keeps eval mode
        # meaningful on short trainings instead of needing ~100 updates
        # to forget the placeholder scale.
        self._seen_batch = False
        self._cache = None

    def forward(self, x, training=False):
        x = _require_3d(np.asarray(x), "BatchNorm1D")
        if x.shape[1] != self.channels:
            raise ShapeError(f"BatchNorm1D expects {self.channels} channels, got {x.shape}")
        if training:
            m = x.shape[0] * x.shape[2]
            if m <= 1:
                raise DegenerateBatch("batch statistics need more than one value per channel")
            # single pass per moment, accumulated in float64
            mean64 = np.einsum("bcl->c", x, dtype=np.float64) / m
            sq64 = np.einsum("bcl,bcl->c", x, x, dtype=np.float64) / m
            mean = mean64.astype(x.dtype)
            var = np.maximum(sq64 - mean64 ** 2, 0.0).astype(x.dtype)
            inv = 1.0 / np.sqrt(var + np.asarray(self.eps, dtype=x.dtype))
            xhat = (x - mean[None, :, None]) * inv[None, :, None]
            unbiased = var * (m / (m - 1))
            mom = 1.0 if not self._seen_batch else self.momentum
            self._seen_batch = True
            self.running_mean = ((1 - mom) * self.running_mean + mom * mean).astype(self.running_mean.dtype)
            self.running_var = ((1 - mom) * self.running_var + mom * unbiased).astype(self.running_var.dtype)
            self._cache = (xhat, inv, m)
        else:
            inv = 1.0 / np.sqrt(self.running_var.astype(x.dtype) + np.asarray(self.eps, dtype=x.dtype))
            xhat = (x - self.running_mean.astype(x.dtype)[None, :, None]) * inv[None, :, None]
            self._cache = None
        return self.gamma.value.astype(x.dtype)[None, :, None] * xhat \
            + self.beta.value.astype(x.dtype)[None, :, None]

    def backward(self, dy):
        xhat, inv, m = self._take_cache()
        gamma = self.gamma.value.astype(dy.dtype)
        sum_dy = np.einsum("bcl->c", dy, dtype=np.float64)
        sum_dy_xhat = np.einsum("bcl,bcl->c", dy, xhat, dtype=np.float64)
        self.gamma.grad = sum_dy_xhat.astype(self.gamma.value.dtype)
        self.beta.grad = sum_dy.astype(self.beta.value.dtype)
        coef = (gamma * inv / m).astype(dy.dtype)[None, :, None]
        mean_dy = (sum_dy / m).astype(dy.dtype)[None, :, None]
        mean_dy_xhat = (sum_dy_xhat / m).astype(dy.dtype)[None, :, None]
        return coef * (m * (dy - mean_dy) - m * xhat * mean_dy_xhat)

    def params(self):
        return [self.gamma, self.beta]

    def flops(self, in_shape):
        return 4 * int(np.prod(in_shape)), in_shape


class GlobalAvgPool(Layer):
    """Mean over the length axis; collapses (B, C, L) to (B, C)."""

    def __init__(self):
        self._cache = None

    def forward(self, x, training=False):
        x = _require_3d(np.asarray(x), "GlobalAvgPool")
        self._cache = x.shape[2] if training else None
        return x.mean(axis=2, dtype=x.dtype)

    def backward(self, dy):
        length = self._take_cache()
        return np.repeat(dy[:, :, None] / np.asarray(length, dtype=dy.dtype), length, axis=2)

    def flops(self, in_shape):
        channels, _ = in_shape
        return channels, (channels,)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(
            "weight", rng.uniform(-bound, bound, (out_features, in_features)).astype(dtype))
        self.bias = Parameter("bias", rng.uniform(-bound, bound, out_features).astype(dtype))
        self._cache = None

    def forward(self, x, training=False):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"Dense expects (batch, {self.in_features}), got {x.shape}")
        self._cache = x if training else None
        return x @ self.weight.value.T.astype(x.dtype) + self.bias.value.astype(x.dtype)

    def backward(self, dy):
        x = self._take_cache()
        self.weight.grad = (dy.T @ x).astype(self.weight.value.dtype)
        self.bias.grad = dy.sum(axis=0).astype(self.bias.value.dtype)
        return dy @ self.weight.value.astype(dy.dtype)

    def params(self):
        return [self.weight, self.bias]

    def flops(self, in_shape):
        return 2 * self.in_features * self.out_features, (self.out_features,)


class Tile(Layer):
    """Broadcast (B, C) features to a (B, C, length) sequence."""

    def __init__(self, length: int):
        self.length = length
        self._warm = False

    def forward(self, x, training=False):
        if np.asarray(x).ndim != 2:
            raise ShapeError(f"Tile expects (batch, channels), got {np.shape(x)}")
        self._warm = training
        return np.repeat(np.asarray(x)[:, :, None], self.length, axis=2)

    def backward(self, dy):
        if not self._warm:
            raise StaleCache("Tile.backward called without a cached forward pass")
        self._warm = False
        return dy.sum(axis=2)

    def flops(self, in_shape):
        (channels,) = in_shape
        return channels * self.length, (channels, self.length)


class Upsample2x(Layer):
    """Nearest-neighbour doubling of the length axis."""

    def __init__(self):
        self._warm = False

    def forward(self, x, training=False):
        x = _require_3d(np.asarray(x), "Upsample2x")
        self._warm = training
        return np.repeat(x, 2, axis=2)

    def backward(self, dy):
        if not self._warm:
            raise StaleCache("Upsample2x.backward called without a cached forward pass")
        self._warm = False
        n_b, n_c, n_l = dy.shape
        return dy.reshape(n_b, n_c, n_l // 2, 2).sum(axis=3)

    def flops(self, in_shape):
        channels, length = in_shape
        return channels * 2 * length, (channels, 2 * length)


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def flops(self, in_shape):
        total = 0
        shape = in_shape
        for layer in self.layers:
            count, shape = layer.flops(shape)
            total += count
        return total, shape
