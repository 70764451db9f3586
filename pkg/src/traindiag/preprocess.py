"""Raw recordings to normalized model inputs.

Three stages: channel selection by the physical component topology
(everything attaches to the gearbox), speed-condition identification from
the dominant peak of the CH7 current spectrum, and per-(speed, channel)
min-max normalization with statistics fitted on the training split only.

The speed identification task always runs on the spectrum, even for the
raw-representation ablation and for recordings whose condition metadata
is unknown; there is no metadata fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    InvalidComponent, InvalidSignal, MissingConditionStats, SpeedUnidentified,
)
from .spectrum import HalfMagnitudeSpectrum, fft_real_half, slice_recording
from .synth import N_CHANNELS

# Per-component channel sets: own sensors plus the directly connected
# gearbox; the gearbox itself sees every channel because all components
# attach to it. CH7-9 (current) belong to the motor block.
CHANNEL_SELECTION_TABLE: dict[str, tuple[int, ...]] = {
    "M": tuple(range(1, 16)),
    "G": tuple(range(1, 22)),
    "LA": tuple(range(10, 19)),
    "RA": tuple(range(10, 16)) + (19, 20, 21),
}

SPEED_CANDIDATES_HZ = (20.0, 40.0, 60.0)
SPEED_BAND_HZ = (5.0, 80.0)
DEFAULT_SLIP_TOLERANCE_HZ = 5.0

STATS_MAGIC = "traindiag-normstats"
STATS_VERSION = 1

REPRESENTATIONS = ("fft", "raw")


@dataclass(frozen=True)
class ChannelSelection:
    fault_component: str
    channels: tuple[int, ...]


def select_channels(fault_component: str) -> ChannelSelection:
    """Channels relevant to one component's fault diagnosis."""
    table = CHANNEL_SELECTION_TABLE.get(fault_component)
    if table is None:
        raise InvalidComponent(f"unknown component {fault_component!r}")
    return ChannelSelection(fault_component, table)


def identify_speed(ch7_spectrum: HalfMagnitudeSpectrum,
                   candidates: tuple[float, ...] = SPEED_CANDIDATES_HZ,
                   slip_tolerance: float = DEFAULT_SLIP_TOLERANCE_HZ) -> float:
    """Speed condition from the dominant current peak in [5, 80] Hz.

    Returns the candidate nearest the peak frequency if it lies within
    `slip_tolerance`; otherwise raises SpeedUnidentified carrying the
    peak. Invariant to uniform scaling of the spectrum (pure argmax).
    """
    res = ch7_spectrum.bin_resolution
    if res > 1.0:
        raise InvalidSignal(f"speed identification needs <= 1 Hz bins, got {res} Hz")
    lo = math.ceil(SPEED_BAND_HZ[0] / res)
    hi = math.floor(SPEED_BAND_HZ[1] / res)
    window = ch7_spectrum.amplitudes[lo:hi + 1]
    if window.size == 0:
        raise InvalidSignal("spectrum does not cover the speed search band")
    peak_hz = (lo + int(np.argmax(window))) * res
    best = min(candidates, key=lambda c: abs(c - peak_hz))
    if abs(best - peak_hz) > slip_tolerance:
        raise SpeedUnidentified(peak_hz)
    return float(best)


@dataclass(frozen=True)
class SpectrumFrame:
    """One slice's per-channel feature rows plus its identified speed.

    `values` is (n_channels, n_features): half-magnitude spectra for the
    fft representation (32000 bins for pipeline slices) or raw samples
    for the raw ablation. `origin` is (recording id, slice index).
    """

    channel_ids: tuple[int, ...]
    values: np.ndarray
    speed: float
    origin: tuple[str, int]
    representation: str = "fft"
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2 or values.shape[0] != len(self.channel_ids):
            raise InvalidSignal(
                f"frame values {values.shape} do not match {len(self.channel_ids)} channels")
        if not np.all(np.isfinite(values)):
            raise InvalidSignal("frame contains non-finite values")
        object.__setattr__(self, "values", values)

    def select(self, channels: tuple[int, ...]) -> "SpectrumFrame":
        index = {ch: i for i, ch in enumerate(self.channel_ids)}
        rows = [index[ch] for ch in channels]
        return replace(self, channel_ids=tuple(channels), values=self.values[rows])


def recording_frames(recording, recording_id: str = "", slice_seconds: float = 1.0,
                     representation: str = "fft", real_part_only: bool = False,
                     slip_tolerance: float = DEFAULT_SLIP_TOLERANCE_HZ) -> list[SpectrumFrame]:
    """Slice a recording and build one un-normalized frame per slice."""
    if representation not in REPRESENTATIONS:
        raise InvalidSignal(f"unknown representation {representation!r}")
    frames = []
    for si, group in enumerate(slice_recording(recording, slice_seconds)):
        block = np.stack([ts.samples for ts in group])
        n = block.shape[1]
        res = recording.sample_rate / n
        if representation == "fft":
            half = fft_real_half(block)
            values = np.abs(half.real) if real_part_only else np.abs(half)
            ch7 = HalfMagnitudeSpectrum(np.abs(half[6]), res)
        else:
            values = block
            ch7 = HalfMagnitudeSpectrum(np.abs(fft_real_half(block[6])), res)
        speed = identify_speed(ch7, slip_tolerance=slip_tolerance)
        frames.append(SpectrumFrame(
            channel_ids=tuple(range(1, N_CHANNELS + 1)),
            values=values.astype(np.float32),
            speed=speed,
            origin=(recording_id, si),
            representation=representation,
        ))
    return frames


class NormStats:
    """Per-(speed, channel) min/max of the training features."""

    def __init__(self, representation: str = "fft"):
        self.representation = representation
        self.values: dict[tuple[float, int], tuple[float, float]] = {}

    def get(self, speed: float, channel: int) -> tuple[float, float]:
        pair = self.values.get((float(speed), int(channel)))
        if pair is None:
            raise MissingConditionStats(
                f"no normalization statistics for speed {speed:g} Hz, channel {channel}")
        return pair

    def update(self, speed: float, channel: int, lo: float, hi: float):
        key = (float(speed), int(channel))
        old = self.values.get(key)
        if old is not None:
            lo, hi = min(lo, old[0]), max(hi, old[1])
        self.values[key] = (float(lo), float(hi))

    def save(self, path) -> None:
        lines = [f"{STATS_MAGIC} {STATS_VERSION} {self.representation}"]
        for (speed, channel), (lo, hi) in sorted(self.values.items()):
            lines.append(f"{speed:g}\t{channel}\t{lo!r}\t{hi!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

    @classmethod
    def load(cls, path) -> "NormStats":
        lines = Path(path).read_text(encoding="ascii").splitlines()
        if not lines:
            raise MissingConditionStats(f"{path}: empty stats file")
        head = lines[0].split()
        if len(head) != 3 or head[0] != STATS_MAGIC or head[1] != str(STATS_VERSION):
            raise MissingConditionStats(f"{path}: bad stats header {lines[0]!r}")
        stats = cls(representation=head[2])
        for line in lines[1:]:
            if not line.strip():
                continue
            speed, channel, lo, hi = line.split("\t")
            stats.values[(float(speed), int(channel))] = (float(lo), float(hi))
        return stats


def fit_norm_stats(frames) -> NormStats:
    """Global per-(speed, channel) extrema over all bins of all frames.

    Single-writer reduction: call once over the training frames and share
    the result; `normalize` itself is pure.
    """
    frames = list(frames)
    if not frames:
        raise MissingConditionStats("no training frames to fit statistics on")
    stats = NormStats(representation=frames[0].representation)
    for frame in frames:
        lo = frame.values.min(axis=1)
        hi = frame.values.max(axis=1)
        for row, ch in enumerate(frame.channel_ids):
            stats.update(frame.speed, ch, float(lo[row]), float(hi[row]))
    return stats


def normalize(frame: SpectrumFrame, stats: NormStats) -> SpectrumFrame:
    """(a - min) / (max - min) per channel with the frame's speed stats.

    Values outside the training range are allowed to leave [0, 1] (no
    clipping); a degenerate channel with max == min maps to all zeros.
    """
    if stats.representation != frame.representation:
        raise MissingConditionStats(
            f"stats fitted for {stats.representation!r} cannot normalize a "
            f"{frame.representation!r} frame")
    lo = np.empty(len(frame.channel_ids), dtype=np.float64)
    span = np.empty(len(frame.channel_ids), dtype=np.float64)
    for row, ch in enumerate(frame.channel_ids):
        mn, mx = stats.get(frame.speed, ch)
        lo[row] = mn
        span[row] = mx - mn
    degenerate = span == 0
    span[degenerate] = 1.0
    values = (frame.values - lo[:, None].astype(np.float32)) / span[:, None].astype(np.float32)
    values[degenerate] = 0.0
    return replace(frame, values=values.astype(np.float32), normalized=True)
