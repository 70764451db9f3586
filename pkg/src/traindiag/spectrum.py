"""Discrete Fourier transforms and half-magnitude spectra.

The transform stack is self-contained: a direct O(N^2) DFT that serves as
the numerical oracle, an iterative radix-2 FFT for power-of-two lengths,
and a Bluestein chirp-z reduction onto the radix-2 kernel for every other
length (the pipeline's native 64000-sample slices are not a power of two).

All transform functions accept a 1-D signal or a stack of signals in the
last axis and return complex128. They are pure, so they are safe to call
from multiple threads; the small twiddle/chirp caches are append-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySliceSet, InvalidSignal

PIPELINE_SAMPLE_RATE = 64_000.0
PIPELINE_SLICE_LEN = 64_000


@dataclass(frozen=True)
class TimeSlice:
    """One channel's fixed-length window of raw samples."""

    samples: np.ndarray
    sample_rate: float
    channel_id: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidSignal("time slice must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise InvalidSignal("time slice contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class ComplexSpectrum:
    """Full complex DFT of one slice."""

    bins: np.ndarray
    bin_resolution: float

    @classmethod
    def from_slice(cls, ts: TimeSlice) -> "ComplexSpectrum":
        return cls(fft(ts.samples), ts.sample_rate / len(ts))

    def __len__(self) -> int:
        return self.bins.size


@dataclass(frozen=True)
class HalfMagnitudeSpectrum:
    """First N/2 amplitude bins of a real signal's DFT."""

    amplitudes: np.ndarray
    bin_resolution: float

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.float64)
        if not np.all(np.isfinite(amp)) or np.any(amp < 0):
            raise InvalidSignal("amplitudes must be finite and non-negative")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_spectrum(cls, spec: ComplexSpectrum, real_part_only: bool = False) -> "HalfMagnitudeSpectrum":
        return cls(half_magnitude(spec.bins, real_part_only=real_part_only), spec.bin_resolution)

    def __len__(self) -> int:
        return self.amplitudes.size


def _as_complex_batch(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise InvalidSignal("signal must have at least one sample")
    if not np.all(np.isfinite(x)):
        raise InvalidSignal("signal contains non-finite values")
    return np.ascontiguousarray(x, dtype=np.complex128)


def dft_naive(x) -> np.ndarray:
    """Direct evaluation of X[k] = sum_n x[n] e^{-j2pi kn/N}.

    O(N^2); exists as the independent oracle for `fft`. The exponent is
    reduced modulo N in integer arithmetic so large k*n products do not
    lose precision. Accepts (..., N) stacks.
    """
    x = _as_complex_batch(x)
    n_len = x.shape[-1]
    n = np.arange(n_len, dtype=np.int64)
    out = np.empty_like(x)
    # chunk the k rows to bound the (chunk, N) phase table at ~64 MB
    chunk = max(1, (4 << 20) // n_len)
    for start in range(0, n_len, chunk):
        k = n[start:start + chunk, None]
        table = np.exp((-2j * np.pi / n_len) * ((k * n[None, :]) % n_len))
        out[..., start:start + chunk] = x @ table.T
    return out


_BASE_CACHE: dict[int, np.ndarray] = {}
_TWIDDLE_CACHE: dict[int, np.ndarray] = {}
_CHIRP_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT over the last axis.

    Starts from direct DFTs of the interleaved subsequences (base size
    <= 64) and doubles the transform size by the even/odd butterfly until
    the full length is reached. Works in two ping-pong buffers to keep
    the per-level traffic down on long batched inputs.
    """
    n_len = x.shape[-1]
    lead = x.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    base = min(n_len, 64)
    mat = _BASE_CACHE.get(base)
    if mat is None:
        idx = np.arange(base)
        mat = np.exp((-2j * np.pi / base) * (idx[:, None] * idx[None, :]))
        _BASE_CACHE[base] = mat
    cur = np.empty((rows, n_len), dtype=np.complex128)
    np.matmul(mat, x.reshape(rows, base, n_len // base), out=cur.reshape(rows, base, -1))
    if base == n_len:
        return cur.reshape(*lead, n_len)
    other = np.empty_like(cur)
    tmp = np.empty((rows, n_len // 2), dtype=np.complex128)
    size = base
    while size < n_len:
        count = n_len // size
        src = cur.reshape(rows, size, count)
        dst = other.reshape(rows, 2 * size, count // 2)
        tw = _TWIDDLE_CACHE.get(size)
        if tw is None:
            tw = np.exp((-1j * np.pi / size) * np.arange(size))[None, :, None]
            _TWIDDLE_CACHE[size] = tw
        even = src[:, :, : count // 2]
        odd = src[:, :, count // 2:]
        t = tmp.reshape(rows, size, count // 2)
        np.multiply(tw, odd, out=t)
        np.add(even, t, out=dst[:, :size, :])
        np.subtract(even, t, out=dst[:, size:, :])
        cur, other = other, cur
        size *= 2
    return cur.reshape(*lead, n_len)


def _ifft_pow2(x: np.ndarray) -> np.ndarray:
    y = _fft_pow2(np.conj(x))
    np.conjugate(y, out=y)
    y *= 1.0 / x.shape[-1]
    return y


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    """Arbitrary-length DFT as a power-of-two circular convolution.

    Expresses kn = (k^2 + n^2 - (k-n)^2)/2, turning the transform into a
    chirp modulation, a convolution with the conjugate chirp, and a final
    chirp modulation. The quadratic phase is reduced modulo 2N in integer
    arithmetic to keep precision at large N.
    """
    n_len = x.shape[-1]
    cached = _CHIRP_CACHE.get(n_len)
    if cached is None:
        m_len = 1 << (2 * n_len - 1).bit_length()
        q = (np.arange(n_len, dtype=np.int64) ** 2) % (2 * n_len)
        chirp = np.exp((-1j * np.pi / n_len) * q)
        kernel = np.zeros(m_len, dtype=np.complex128)
        kernel[:n_len] = np.conj(chirp)
        kernel[m_len - n_len + 1:] = np.conj(chirp[1:])[::-1]
        cached = (chirp, _fft_pow2(kernel))
        _CHIRP_CACHE[n_len] = cached
    chirp, kernel_f = cached
    m_len = kernel_f.shape[-1]
    a = np.zeros(x.shape[:-1] + (m_len,), dtype=np.complex128)
    a[..., :n_len] = x * chirp
    fa = _fft_pow2(a)
    fa *= kernel_f
    np.conjugate(fa, out=fa)
    conv = _fft_pow2(fa)
    np.conjugate(conv, out=conv)
    conv *= 1.0 / m_len
    out = conv[..., :n_len] * chirp
    return out


def fft(x) -> np.ndarray:
    """Fast Fourier transform over the last axis; equals `dft_naive`.

    Power-of-two lengths run the radix-2 even/odd recursion directly;
    all other lengths (including 64000) go through the Bluestein
    reduction, so the bin count always matches the input length.
    """
    x = _as_complex_batch(x)
    n_len = x.shape[-1]
    if n_len & (n_len - 1) == 0:
        return _fft_pow2(x)
    return _fft_bluestein(x)


def ifft(x) -> np.ndarray:
    """Inverse transform of `fft` (same length convention)."""
    x = _as_complex_batch(x)
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def fft_real_half(x) -> np.ndarray:
    """First N//2 complex bins of `fft` for a batch of real rows.

    Two real rows are packed into one complex signal and unpacked via
    Hermitian symmetry, halving the transform work; the result equals
    ``fft(x)[..., : N // 2]``. This is the preprocessing hot path for
    21-channel recordings.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
        squeeze = True
    else:
        squeeze = False
    if not np.all(np.isfinite(x)):
        raise InvalidSignal("signal contains non-finite values")
    rows, n_len = x.shape
    half = n_len // 2
    if n_len < 2:
        raise InvalidSignal("need at least 2 samples for a half spectrum")
    out = np.empty((rows, half), dtype=np.complex128)
    pairs = rows // 2
    if pairs:
        z = fft(x[: 2 * pairs : 2] + 1j * x[1 : 2 * pairs : 2])
        zrev = np.empty((pairs, half), dtype=np.complex128)
        zrev[:, 0] = z[:, 0]
        zrev[:, 1:] = z[:, : half : -1]
        np.conjugate(zrev, out=zrev)
        out[: 2 * pairs : 2] = 0.5 * (z[:, :half] + zrev)
        out[1 : 2 * pairs : 2] = -0.5j * (z[:, :half] - zrev)
    if rows % 2:
        out[-1] = fft(x[-1])[:half]
    return out[0] if squeeze else out


def half_magnitude(spectrum_bins, real_part_only: bool = False) -> np.ndarray:
    """Amplitudes of the first N//2 bins of a real signal's spectrum.

    Hermitian symmetry makes bins above N/2 redundant for real input,
    which is what licenses dropping them. By default the full complex
    magnitude sqrt(Re^2 + Im^2) is taken; `real_part_only` instead keeps
    sqrt(Re^2) = |Re|, a deliberately crippled variant retained only for
    comparison experiments (it breaks shift invariance).
    """
    bins = np.asarray(spectrum_bins)
    half = bins.shape[-1] // 2
    if real_part_only:
        return np.abs(bins[..., :half].real).astype(np.float64)
    return np.abs(bins[..., :half]).astype(np.float64)


def slice_recording(recording, slice_seconds: float = 1.0) -> list[list[TimeSlice]]:
    """Cut a recording into contiguous, nonoverlapping per-channel slices.

    Returns one group per window, each group holding one TimeSlice per
    channel in channel order; the trailing remainder shorter than a full
    window is discarded. `recording` needs `channels` (n_channels, n)
    and `sample_rate` attributes.
    """
    channels = np.asarray(recording.channels)
    rate = float(recording.sample_rate)
    slice_len = slice_seconds * rate
    if slice_len <= 0 or slice_len != int(slice_len):
        raise InvalidSignal(f"slice of {slice_seconds} s is not a whole number of samples at {rate} Hz")
    slice_len = int(slice_len)
    total = channels.shape[-1]
    if total < slice_len:
        raise EmptySliceSet(f"recording has {total} samples, shorter than one {slice_len}-sample slice")
    groups = []
    for start in range(0, total - slice_len + 1, slice_len):
        group = [
            TimeSlice(channels[ch, start:start + slice_len], rate, ch + 1)
            for ch in range(channels.shape[0])
        ]
        groups.append(group)
    return groups
