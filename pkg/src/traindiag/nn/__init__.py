"""Minimal deterministic neural-network core (numpy + numba kernels)."""

from .checkpoint import load_checkpoint, save_checkpoint
from .flops import count_flops
from .kernels import backend
from .layers import (
    BatchNorm1D, Conv1D, Dense, GlobalAvgPool, Layer, MaxPool1D, Parameter,
    ReLU, Sequential, Tile, Upsample2x,
)
from .losses import bce_with_logits, mse
from .network import DEFAULT_CONV_WIDTHS, DEFAULT_DENSE_WIDTHS, MODEL_KINDS, FaultNet
from .optim import Adam

__all__ = [
    "Adam", "BatchNorm1D", "Conv1D", "Dense", "FaultNet", "GlobalAvgPool",
    "Layer", "MaxPool1D", "Parameter", "ReLU", "Sequential", "Tile",
    "Upsample2x", "backend", "bce_with_logits", "count_flops",
    "load_checkpoint", "mse", "save_checkpoint",
    "DEFAULT_CONV_WIDTHS", "DEFAULT_DENSE_WIDTHS", "MODEL_KINDS",
]
