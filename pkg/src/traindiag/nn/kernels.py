"""Low-level conv/pool kernels with a pure-numpy fallback.

The 1-D convolution dominates training cost, so its forward pass, input
gradient and weight gradient are cache-blocked loops compiled with numba.
Setting the environment variable ``TRAINDIAG_FORCE_NUMPY=1`` (or a failed
numba import) selects the slower numpy implementations; both paths
compute the same quantities and are cross-checked in the tests.

Layout conventions: activations are (batch, channels, length), weights
are (out_channels, in_channels, kernel). All kernels accept float32 or
float64 and are deterministic for a fixed input regardless of thread
count (each parallel worker writes disjoint output slices).
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_BLOCK = 2048  # length-axis tile; keeps one tile in L2 across all taps


def _np_conv_gather(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y[b,o,i] = bias[o] + sum_{c,j} w[o,c,j] * x[b,c,i+j] (numpy path)."""
    n_b, _, n_x = x.shape
    n_o, _, n_k = w.shape
    n_out = n_x - n_k + 1
    wj = [np.ascontiguousarray(w[:, :, j]) for j in range(n_k)]
    y = np.empty((n_b, n_o, n_out), dtype=x.dtype)
    for s in range(0, n_out, _BLOCK):
        e = min(s + _BLOCK, n_out)
        acc = wj[0] @ x[:, :, s:e]
        for j in range(1, n_k):
            acc += wj[j] @ x[:, :, s + j:e + j]
        y[:, :, s:e] = acc
    y += bias[None, :, None]
    return y


def _np_conv_dw(dy: np.ndarray, xp: np.ndarray) -> np.ndarray:
    """dw[o,c,j] = sum_{b,i} dy[b,o,i] * xp[b,c,i+j] (numpy path)."""
    n_b, n_o, n_out = dy.shape
    _, n_c, n_x = xp.shape
    n_k = n_x - n_out + 1
    dw = np.zeros((n_o, n_c, n_k), dtype=xp.dtype)
    for s in range(0, n_out, _BLOCK):
        e = min(s + _BLOCK, n_out)
        dy_blk = dy[:, :, s:e]
        for j in range(n_k):
            x_blk = xp[:, :, s + j:e + j]
            dw[:, :, j] += np.einsum("boi,bci->oc", dy_blk, x_blk)
    return dw


def _np_maxpool(x: np.ndarray, kernel: int, stride: int):
    win = sliding_window_view(x, kernel, axis=2)[:, :, ::stride]
    rel = win.argmax(axis=3)
    y = np.take_along_axis(win, rel[..., None], axis=3)[..., 0]
    idx = rel + np.arange(0, x.shape[2] - kernel + 1, stride)[None, None, :]
    return np.ascontiguousarray(y), idx.astype(np.int64)


def _np_maxpool_bwd(dy: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    n_b, n_c, n_out = dy.shape
    dx = np.zeros((n_b, n_c, length), dtype=dy.dtype)
    flat = (np.arange(n_b * n_c)[:, None] * length + idx.reshape(n_b * n_c, n_out)).ravel()
    counts = np.bincount(flat, weights=dy.ravel().astype(np.float64), minlength=n_b * n_c * length)
    dx[...] = counts.reshape(n_b, n_c, length).astype(dy.dtype)
    return dx


_HAVE_NUMBA = False
if not os.environ.get("TRAINDIAG_FORCE_NUMPY"):
    try:
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False

if _HAVE_NUMBA:

    # The kernel-size-9 hot path is a separate function: mixing it with the
    # generic tap loop in one jitted body defeats LLVM's vectorization.
    # Parallelism runs over (batch x length-block) or output channels so
    # the two worker threads stay busy even at batch size 1.
    @njit(parallel=True, cache=True)
    def _nb_conv_gather9(x, w, bias, y, block):
        n_b, n_c, _ = x.shape
        n_o = w.shape[0]
        n_out = y.shape[2]
        nblk = (n_out + block - 1) // block
        for bt in prange(n_b * nblk):
            b = bt // nblk
            s = (bt % nblk) * block
            e = min(s + block, n_out)
            n = e - s
            for o in range(n_o):
                acc = np.empty(n, x.dtype)
                bv = bias[o]
                for i in range(n):
                    acc[i] = bv
                for c in range(n_c):
                    # slice-relative indexing; absolute offsets defeat SIMD
                    xs = x[b, c, s:s + n + 8]
                    w0 = w[o, c, 0]; w1 = w[o, c, 1]; w2 = w[o, c, 2]
                    w3 = w[o, c, 3]; w4 = w[o, c, 4]; w5 = w[o, c, 5]
                    w6 = w[o, c, 6]; w7 = w[o, c, 7]; w8 = w[o, c, 8]
                    for i in range(n):
                        acc[i] += (w0 * xs[i] + w1 * xs[i + 1] + w2 * xs[i + 2]
                                   + w3 * xs[i + 3] + w4 * xs[i + 4] + w5 * xs[i + 5]
                                   + w6 * xs[i + 6] + w7 * xs[i + 7] + w8 * xs[i + 8])
                y[b, o, s:e] = acc

    @njit(parallel=True, cache=True)
    def _nb_conv_gather_any(x, w, bias, y, block):
        n_b, n_c, _ = x.shape
        n_o = w.shape[0]
        n_k = w.shape[2]
        n_out = y.shape[2]
        nblk = (n_out + block - 1) // block
        for bt in prange(n_b * nblk):
            b = bt // nblk
            s = (bt % nblk) * block
            e = min(s + block, n_out)
            n = e - s
            for o in range(n_o):
                acc = np.empty(n, x.dtype)
                bv = bias[o]
                for i in range(n):
                    acc[i] = bv
                for c in range(n_c):
                    for j in range(n_k):
                        wv = w[o, c, j]
                        xs = x[b, c, s + j:s + j + n]
                        for i in range(n):
                            acc[i] += wv * xs[i]
                y[b, o, s:e] = acc

    @njit(parallel=True, fastmath=True, cache=True)
    def _nb_conv_dw9(dy, xp, dw):
        n_b, n_o, n_out = dy.shape
        n_c = xp.shape[1]
        zero = xp[0, 0, 0] * 0
        for o in prange(n_o):
            for c in range(n_c):
                a0 = zero; a1 = zero; a2 = zero; a3 = zero; a4 = zero
                a5 = zero; a6 = zero; a7 = zero; a8 = zero
                for b in range(n_b):
                    dys = dy[b, o]
                    xs = xp[b, c]
                    for i in range(n_out):
                        d = dys[i]
                        a0 += d * xs[i]; a1 += d * xs[i + 1]; a2 += d * xs[i + 2]
                        a3 += d * xs[i + 3]; a4 += d * xs[i + 4]; a5 += d * xs[i + 5]
                        a6 += d * xs[i + 6]; a7 += d * xs[i + 7]; a8 += d * xs[i + 8]
                dw[o, c, 0] = a0; dw[o, c, 1] = a1; dw[o, c, 2] = a2
                dw[o, c, 3] = a3; dw[o, c, 4] = a4; dw[o, c, 5] = a5
                dw[o, c, 6] = a6; dw[o, c, 7] = a7; dw[o, c, 8] = a8

    @njit(parallel=True, fastmath=True, cache=True)
    def _nb_conv_dw_any(dy, xp, dw):
        n_b, n_o, n_out = dy.shape
        n_c = xp.shape[1]
        n_k = dw.shape[2]
        zero = xp[0, 0, 0] * 0
        for o in prange(n_o):
            for c in range(n_c):
                for j in range(n_k):
                    a = zero
                    for b in range(n_b):
                        dys = dy[b, o]
                        xs = xp[b, c, j:j + n_out]
                        for i in range(n_out):
                            a += dys[i] * xs[i]
                    dw[o, c, j] = a

    @njit(parallel=True, cache=True)
    def _nb_maxpool(x, kernel, stride, y, idx):
        n_b, n_c, _ = x.shape
        n_out = y.shape[2]
        for bc in prange(n_b * n_c):
            b = bc // n_c
            c = bc % n_c
            xs = x[b, c]
            for i in range(n_out):
                base = i * stride
                m = xs[base]
                mi = base
                for j in range(1, kernel):
                    v = xs[base + j]
                    if v > m:
                        m = v
                        mi = base + j
                y[b, c, i] = m
                idx[b, c, i] = mi

    @njit(parallel=True, cache=True)
    def _nb_maxpool_bwd(dy, idx, dx):
        n_b, n_c, n_out = dy.shape
        for bc in prange(n_b * n_c):
            b = bc // n_c
            c = bc % n_c
            for i in range(n_out):
                dx[b, c, idx[b, c, i]] += dy[b, c, i]


def backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return "numba" if _HAVE_NUMBA else "numpy"


def conv_gather(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation plus bias over the last axis.

    Computing the input gradient of a convolution is the same gather with
    swapped channel roles and tap-reversed weights, so this single kernel
    backs both the forward pass and backward-to-input.
    """
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    bias = np.ascontiguousarray(bias, dtype=x.dtype)
    n_out = x.shape[2] - w.shape[2] + 1
    if not _HAVE_NUMBA:
        return _np_conv_gather(x, w, bias)
    y = np.empty((x.shape[0], w.shape[0], n_out), dtype=x.dtype)
    if w.shape[2] == 9:
        _nb_conv_gather9(x, w, bias, y, _BLOCK)
    else:
        _nb_conv_gather_any(x, w, bias, y, _BLOCK)
    return y


def conv_dw(dy: np.ndarray, xp: np.ndarray) -> np.ndarray:
    """Weight gradient of the convolution, contracted over batch and length."""
    dy = np.ascontiguousarray(dy)
    xp = np.ascontiguousarray(xp, dtype=dy.dtype)
    if not _HAVE_NUMBA:
        return _np_conv_dw(dy, xp)
    n_k = xp.shape[2] - dy.shape[2] + 1
    dw = np.empty((dy.shape[1], xp.shape[1], n_k), dtype=dy.dtype)
    if n_k == 9:
        _nb_conv_dw9(dy, xp, dw)
    else:
        _nb_conv_dw_any(dy, xp, dw)
    return dw


def maxpool(x: np.ndarray, kernel: int, stride: int):
    """Window maxima and their absolute argmax positions (first on ties)."""
    x = np.ascontiguousarray(x)
    if not _HAVE_NUMBA:
        return _np_maxpool(x, kernel, stride)
    n_out = (x.shape[2] - kernel) // stride + 1
    y = np.empty((x.shape[0], x.shape[1], n_out), dtype=x.dtype)
    idx = np.empty((x.shape[0], x.shape[1], n_out), dtype=np.int64)
    _nb_maxpool(x, kernel, stride, y, idx)
    return y, idx


def maxpool_bwd(dy: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    """Scatter-add pooled gradients back to the input positions."""
    dy = np.ascontiguousarray(dy)
    if not _HAVE_NUMBA:
        return _np_maxpool_bwd(dy, idx, length)
    dx = np.zeros((dy.shape[0], dy.shape[1], length), dtype=dy.dtype)
    _nb_maxpool_bwd(dy, np.ascontiguousarray(idx), dx)
    return dx
