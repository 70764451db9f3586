"""Forward-pass FLOP counting.

Convention (fixed; chosen for comparability, not hardware accuracy):
- Conv1D: 2 * kernel * C_in * C_out * L_out multiply-adds plus one bias
  add per output element.
- Dense: 2 * n_in * n_out.
- ReLU, max pooling, global average pooling, tile, upsample: one
  operation per output element.
- BatchNorm: 4 per element (subtract, scale, multiply, shift).
Counts are per sample (no batch dimension) and exclude the loss head.
"""

from __future__ import annotations

from .layers import Layer, Sequential
from .network import FaultNet


def count_flops(net, input_shape: tuple | None = None) -> int:
    """FLOPs for one forward pass of a FaultNet, Sequential, or Layer."""
    if isinstance(net, FaultNet):
        return net.flops()
    if isinstance(net, (Sequential, Layer)):
        if input_shape is None:
            raise ValueError("input_shape required for bare layers")
        count, _ = net.flops(tuple(input_shape))
        return count
    if isinstance(net, (list, tuple)):
        if input_shape is None:
            raise ValueError("input_shape required for layer lists")
        total = 0
        shape = tuple(input_shape)
        for layer in net:
            count, shape = layer.flops(shape)
            total += count
        return total
    raise TypeError(f"cannot count FLOPs of {type(net).__name__}")
