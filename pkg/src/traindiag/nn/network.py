"""The per-fault classifier network and its autoencoder variants.

The encoder is four conv blocks [Conv1D(k9,p1,s1) -> ReLU -> MaxPool(4,2)
-> BatchNorm] with channel progression in_channels -> 16 -> 32 -> 64 ->
128, followed by global average pooling into a 128-dim latent vector and
a [32, 16, 16] dense stack ending in a single logit.

Variants:
- "cnn": encoder + classifier head.
- "sup_conv_ae": adds a mirror decoder (tile + 4x [upsample, conv]) whose
  reconstruction feeds an auxiliary MSE term; the latent feeds both the
  head and the decoder.
- "unsup_ae": encoder + decoder only; classification happens outside the
  network by thresholding reconstruction error.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .layers import (
    BatchNorm1D, Conv1D, Dense, GlobalAvgPool, MaxPool1D, ReLU, Sequential,
    Tile, Upsample2x,
)

DEFAULT_CONV_WIDTHS = (16, 32, 64, 128)
DEFAULT_DENSE_WIDTHS = (32, 16, 16)
MODEL_KINDS = ("cnn", "sup_conv_ae", "unsup_ae")


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream)))


class FaultNet:
    """One fault's binary classifier (optionally with decoder)."""

    def __init__(self, in_channels: int, input_len: int, model: str = "cnn",
                 conv_widths=DEFAULT_CONV_WIDTHS, dense_widths=DEFAULT_DENSE_WIDTHS,
                 kernel_size: int = 9, padding: int = 1, pool_kernel: int = 4,
                 pool_stride: int = 2, seed: int = 0, dtype=np.float32):
        if model not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {model!r}")
        self.in_channels = in_channels
        self.input_len = input_len
        self.model = model
        self.conv_widths = tuple(conv_widths)
        self.dense_widths = tuple(dense_widths)
        self.kernel_size = kernel_size
        self.padding = padding
        self.pool_kernel = pool_kernel
        self.pool_stride = pool_stride
        self.seed = seed
        self.dtype = np.dtype(dtype)

        # Independent init streams keep encoder/head weights identical
        # whether or not a decoder is attached.
        enc_rng = _rng_for(seed, 0)
        blocks = []
        prev = in_channels
        for width in self.conv_widths:
            blocks += [
                Conv1D(prev, width, kernel_size, padding, rng=enc_rng, dtype=dtype),
                ReLU(inplace=True),
                MaxPool1D(pool_kernel, pool_stride),
                BatchNorm1D(width, dtype=dtype),
            ]
            prev = width
        self.encoder = Sequential(blocks)
        self.gap = GlobalAvgPool()

        latent = self.conv_widths[-1]
        if model == "unsup_ae":
            self.head = None
        else:
            head_rng = _rng_for(seed, 1)
            dense = []
            widths = (latent,) + self.dense_widths
            for n_in, n_out in zip(widths, widths[1:]):
                dense += [Dense(n_in, n_out, rng=head_rng, dtype=dtype), ReLU()]
            dense.append(Dense(widths[-1], 1, rng=head_rng, dtype=dtype))
            self.head = Sequential(dense)

        if model == "cnn":
            self.decoder = None
        else:
            upsample_factor = 2 ** len(self.conv_widths)
            if input_len % upsample_factor:
                raise ShapeError(
                    f"autoencoder variants need input_len divisible by {upsample_factor}, got {input_len}")
            dec_rng = _rng_for(seed, 2)
            same_pad = kernel_size // 2
            dec = [Tile(input_len // upsample_factor)]
            rev = (latent,) + tuple(reversed(self.conv_widths[:-1]))
            for n_in, n_out in zip(rev, rev[1:]):
                dec += [Upsample2x(),
                        Conv1D(n_in, n_out, kernel_size, same_pad, rng=dec_rng, dtype=dtype),
                        ReLU(inplace=True)]
            dec += [Upsample2x(),
                    Conv1D(rev[-1], in_channels, kernel_size, same_pad, rng=dec_rng, dtype=dtype)]
            self.decoder = Sequential(dec)

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray, training: bool = False):
        """Returns (logits or None, reconstruction or None, latent)."""
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"expected (batch, {self.in_channels}, length), got {x.shape}")
        feats = self.encoder.forward(x, training=training)
        latent = self.gap.forward(feats, training=training)
        logits = None
        if self.head is not None:
            logits = self.head.forward(latent, training=training)[:, 0]
        recon = None
        if self.decoder is not None:
            recon = self.decoder.forward(latent, training=training)
        return logits, recon, latent

    def backward(self, dlogits: np.ndarray | None, drecon: np.ndarray | None = None):
        """Accumulate parameter gradients for the cached forward pass."""
        dlatent = None
        if dlogits is not None:
            if self.head is None:
                raise ShapeError("this model kind has no classifier head")
            dlatent = self.head.backward(_as_column(dlogits))
        if drecon is not None:
            if self.decoder is None:
                raise ShapeError("this model kind has no decoder")
            d_dec = self.decoder.backward(drecon)
            dlatent = d_dec if dlatent is None else dlatent + d_dec
        if dlatent is None:
            raise ShapeError("backward needs at least one of dlogits/drecon")
        dfeats = self.gap.backward(dlatent)
        return self.encoder.backward(dfeats)

    # -- parameters / bookkeeping -----------------------------------------

    def params(self):
        out = self.encoder.params()
        if self.head is not None:
            out += self.head.params()
        if self.decoder is not None:
            out += self.decoder.params()
        return out

    def param_groups(self, lr_conv: float, lr_dense: float):
        """Two optimizer groups: conv stack (encoder+decoder) and dense head."""
        conv_params = self.encoder.params() + (self.decoder.params() if self.decoder else [])
        groups = [{"params": conv_params, "lr": lr_conv}]
        if self.head is not None:
            groups.append({"params": self.head.params(), "lr": lr_dense})
        return groups

    def set_eval_buffers(self, buffers: list[np.ndarray]):
        """Restore batchnorm running statistics (checkpoint load)."""
        bns = [l for l in self.encoder.layers if isinstance(l, BatchNorm1D)]
        if len(buffers) != 2 * len(bns):
            raise ShapeError(f"expected {2 * len(bns)} batchnorm buffers, got {len(buffers)}")
        for bn, mean, var in zip(bns, buffers[0::2], buffers[1::2]):
            bn.running_mean = mean.copy()
            bn.running_var = var.copy()
            bn._seen_batch = True

    def eval_buffers(self) -> list[np.ndarray]:
        out = []
        for layer in self.encoder.layers:
            if isinstance(layer, BatchNorm1D):
                out += [layer.running_mean, layer.running_var]
        return out

    def describe(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "input_len": self.input_len,
            "model": self.model,
            "conv_widths": list(self.conv_widths),
            "dense_widths": list(self.dense_widths),
            "kernel_size": self.kernel_size,
            "padding": self.padding,
            "pool_kernel": self.pool_kernel,
            "pool_stride": self.pool_stride,
        }

    @classmethod
    def from_description(cls, desc: dict, seed: int = 0, dtype=np.float32) -> "FaultNet":
        return cls(
            in_channels=desc["in_channels"], input_len=desc["input_len"],
            model=desc["model"], conv_widths=desc["conv_widths"],
            dense_widths=desc["dense_widths"], kernel_size=desc["kernel_size"],
            padding=desc["padding"], pool_kernel=desc["pool_kernel"],
            pool_stride=desc["pool_stride"], seed=seed, dtype=dtype,
        )

    def flops(self) -> int:
        """Per-sample forward FLOPs under the documented convention."""
        total, shape = self.encoder.flops((self.in_channels, self.input_len))
        count, shape = self.gap.flops(shape)
        total += count
        if self.head is not None:
            count, _ = self.head.flops(shape)
            total += count
        if self.decoder is not None:
            count, _ = self.decoder.flops(shape)
            total += count
        return total


def _as_column(dlogits: np.ndarray) -> np.ndarray:
    dlogits = np.asarray(dlogits)
    return dlogits[:, None] if dlogits.ndim == 1 else dlogits
