"""Synthetic 21-channel recordings with compound fault signatures.

The generator is the stand-in for the real test rig: each fault code owns
a frozen signature (tones at fixed multiples of shaft speed, optional
sidebands, a home channel set and attenuated coupling onto the gearbox
channels). Compound labels superpose the signatures of their member
faults on top of a label-independent baseline, so a compound recording
equals the baseline plus the sum of the single-fault deltas for the same
seed. Signature frequencies follow common bearing/gear defect
conventions (inner/outer race, rolling element, cage, mesh sidebands),
but the exact values are synthetic contracts, not rig physics.

Channel roles (1-based ids): CH1-6 motor acceleration, CH7-9 three-phase
motor current, CH10-15 gearbox acceleration, CH16-18 left axle box,
CH19-21 right axle box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidCondition, InvalidLabel
from .labels import CompoundLabel, FAULT_CODES, catalog_labels, parse_label

SAMPLE_RATE = 64_000.0
N_CHANNELS = 21

CURRENT_CHANNELS = frozenset({7, 8, 9})
ACCEL_CHANNELS = tuple(ch for ch in range(1, 22) if ch not in CURRENT_CHANNELS)

MOTOR_CHANNELS = tuple(range(1, 10))
GEARBOX_CHANNELS = tuple(range(10, 16))
LEFT_AXLE_CHANNELS = (16, 17, 18)
RIGHT_AXLE_CHANNELS = (19, 20, 21)

SPEEDS_HZ = (20.0, 40.0, 60.0)
LOADS_KN = (-10.0, 0.0, 10.0)

# Lateral load rescales the acceleration channels' RMS; current channels
# are left untouched.
LOAD_RMS_FACTOR = {-10.0: 0.9, 0.0: 1.0, 10.0: 1.1}

#: Every fault leaks onto its neighbours through the gearbox at this gain.
COUPLING_ATTENUATION = 0.3

#: Motor slip bound; candidates are 20 Hz apart so this stays unambiguous.
SLIP_BOUND_HZ = 2.0

# Baseline content: shaft harmonics on the acceleration channels and the
# dominant supply fundamental on the current channels.
BASELINE_HARMONICS = tuple((h, 0.5 / h) for h in range(1, 6))
CURRENT_FUNDAMENTAL_AMPLITUDE = 1.0
CURRENT_THIRD_HARMONIC_AMPLITUDE = 0.08
CURRENT_NOISE_SCALE = 0.2

_STREAM_BASELINE = 0
_STREAM_FAULT = 1


@dataclass(frozen=True)
class WorkingCondition:
    """Operating regime: shaft speed (Hz) and lateral load (kN)."""

    speed_hz: float
    load_kn: float

    def __post_init__(self):
        if self.speed_hz not in SPEEDS_HZ or self.load_kn not in LOADS_KN:
            raise InvalidCondition(
                f"condition ({self.speed_hz} Hz, {self.load_kn} kN) not among the 9 supported")

    @classmethod
    def all(cls) -> tuple["WorkingCondition", ...]:
        return tuple(cls(s, l) for s in SPEEDS_HZ for l in LOADS_KN)


@dataclass(frozen=True)
class FaultSignature:
    """Spectral fingerprint of one fault code.

    Defects show up as a harmonic comb: tones at h * multiplier * speed
    for h = 1..harmonic_count with slowly decaying amplitude
    (amplitude / sqrt(h)), the broadband footprint of a periodic impact
    train. `modulation`, when set, adds a sideband pair at
    +-modulation*speed around each harmonic at half its amplitude (gear
    meshing). Home channels get the comb at full amplitude, coupled
    channels attenuated by COUPLING_ATTENUATION.
    """

    fault_code: str
    base_frequency_multiplier: float
    harmonic_count: int
    amplitude: float
    modulation: float | None
    home_channels: tuple[int, ...]
    coupled_channels: tuple[int, ...]

    def __post_init__(self):
        if self.amplitude <= 0 or self.base_frequency_multiplier <= 0:
            raise InvalidLabel(f"signature for {self.fault_code} must have positive amplitude/multiplier")
        if set(self.home_channels) & set(self.coupled_channels):
            raise InvalidLabel(f"signature for {self.fault_code} has overlapping home/coupled sets")

    def tones(self, speed_hz: float) -> list[tuple[float, float]]:
        """(frequency_hz, amplitude) pairs for the given shaft speed."""
        out = []
        for h in range(1, self.harmonic_count + 1):
            freq = self.base_frequency_multiplier * speed_hz * h
            amp = self.amplitude / math.sqrt(h)
            out.append((freq, amp))
            if self.modulation is not None:
                spacing = self.modulation * speed_hz
                out.append((freq - spacing, amp / 2))
                out.append((freq + spacing, amp / 2))
        return out


def _sig(code, mult, harmonics, amp, mod, home, coupled):
    return FaultSignature(code, mult, harmonics, amp, mod, tuple(home), tuple(coupled))


_G_COUPLED = tuple(range(1, 7)) + LEFT_AXLE_CHANNELS + RIGHT_AXLE_CHANNELS

#: Frozen signature table. Base multipliers are pairwise distinct, land on
#: exact 1 Hz bins at all three speeds, and harmonic counts keep each comb
#: below a quarter of the Nyquist band at 60 Hz shaft speed. Bearing-style
#: multipliers (inner race ~5.4/7.3/5.9, outer ~3.6/4.9, roller ~2.8/6.1,
#: cage ~0.45/0.6) and mesh-style multipliers with shaft sidebands for the
#: gear tooth faults.
SIGNATURES: dict[str, FaultSignature] = {
    s.fault_code: s for s in (
        _sig("M1", 2.4, 30, 0.8, None, MOTOR_CHANNELS, GEARBOX_CHANNELS),
        _sig("M2", 1.0, 40, 0.6, 0.15, MOTOR_CHANNELS, GEARBOX_CHANNELS),
        _sig("M3", 4.1, 25, 0.7, None, MOTOR_CHANNELS, GEARBOX_CHANNELS),
        _sig("M4", 1.8, 30, 0.6, None, MOTOR_CHANNELS, GEARBOX_CHANNELS),
        _sig("G1", 16.0, 6, 0.9, 1.0, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G2", 32.0, 5, 0.8, 1.0, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G3", 12.0, 8, 0.9, None, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G4", 20.0, 6, 0.8, 1.0, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G5", 7.3, 20, 0.7, None, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G6", 4.9, 25, 0.7, None, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G7", 6.1, 22, 0.6, None, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("G8", 0.6, 45, 0.6, None, GEARBOX_CHANNELS, _G_COUPLED),
        _sig("LA1", 5.4, 22, 0.7, None, LEFT_AXLE_CHANNELS, GEARBOX_CHANNELS),
        _sig("LA2", 3.6, 28, 0.7, None, LEFT_AXLE_CHANNELS, GEARBOX_CHANNELS),
        _sig("LA3", 2.8, 30, 0.6, None, LEFT_AXLE_CHANNELS, GEARBOX_CHANNELS),
        _sig("LA4", 0.45, 50, 0.6, None, LEFT_AXLE_CHANNELS, GEARBOX_CHANNELS),
        _sig("RA1", 5.9, 20, 0.7, None, RIGHT_AXLE_CHANNELS, GEARBOX_CHANNELS),
    )
}


@dataclass
class Recording:
    """One multi-channel sample: (21, n) float32 at 64 kHz."""

    channels: np.ndarray
    sample_rate: float
    label: CompoundLabel
    condition: WorkingCondition | None
    seed: int

    def __post_init__(self):
        ch = np.asarray(self.channels)
        if ch.ndim != 2 or ch.shape[0] != N_CHANNELS:
            raise InvalidLabel(f"recording needs {N_CHANNELS} channels, got shape {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise InvalidLabel("recording contains non-finite samples")
        self.channels = ch

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


def _rng(seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


class _CombSynth:
    """Adds harmonic combs to sample rows via complex rotation.

    sin(h*w*t + phi) is Im(z^h * e^{j*phi}) with z = e^{j*w*t}; walking h
    with one complex multiply per harmonic avoids a trig call per tone,
    which dominates generation cost for broadband signatures.
    """

    def __init__(self, base_hz: float, n: int, modulation_hz: float | None = None):
        t = np.arange(n, dtype=np.float64)
        self._z1 = np.exp((2j * np.pi * base_hz / SAMPLE_RATE) * t)
        self._zh = np.ones(n, dtype=np.complex128)
        if modulation_hz is not None:
            self._mod = np.exp((2j * np.pi * modulation_hz / SAMPLE_RATE) * t)
        else:
            self._mod = None
        self._h = 0

    def _emit(self, row: np.ndarray, z: np.ndarray, amp: float, phase: float):
        row += amp * (np.cos(phase) * z.imag + np.sin(phase) * z.real)

    def add_harmonic(self, row: np.ndarray, h: int, amp: float, phase: float,
                     side_amp: float | None = None,
                     side_phases: tuple[float, float] | None = None):
        """Advance the ladder to harmonic h and add it (plus sidebands)."""
        while self._h < h:
            self._zh *= self._z1
            self._h += 1
        self._emit(row, self._zh, amp, phase)
        if side_amp is not None:
            lower = self._zh * np.conj(self._mod)
            self._emit(row, lower, side_amp, side_phases[0])
            upper = self._zh * self._mod
            self._emit(row, upper, side_amp, side_phases[1])

    def reset(self):
        self._zh[:] = 1.0
        self._h = 0


def generate_recording(label: CompoundLabel | str, condition: WorkingCondition,
                       duration_s: float = 1.0, noise_level: float = 0.05,
                       seed: int = 0) -> Recording:
    """Deterministically synthesize one labeled recording.

    The baseline (shaft harmonics, three-phase current with a random slip
    within +-2 Hz, Gaussian noise) is drawn from a stream keyed only by
    `seed`, and each fault's tones from a stream keyed by (seed, fault),
    so recordings with different labels but the same seed share the
    baseline exactly and compound labels superpose single-fault content.
    """
    if isinstance(label, str):
        label = parse_label(label)
    if not isinstance(condition, WorkingCondition):
        raise InvalidCondition(f"need a WorkingCondition, got {condition!r}")
    if duration_s < 1.0:
        raise InvalidLabel(f"duration must be at least 1 s, got {duration_s}")
    if noise_level < 0:
        raise InvalidLabel(f"noise level must be >= 0, got {noise_level}")
    n = int(round(duration_s * SAMPLE_RATE))
    speed = condition.speed_hz
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    out = np.zeros((N_CHANNELS, n), dtype=np.float64)

    base = _rng(seed, _STREAM_BASELINE)
    slip = base.uniform(-SLIP_BOUND_HZ, SLIP_BOUND_HZ)
    shaft = _CombSynth(speed, n)
    for ch in ACCEL_CHANNELS:
        row = out[ch - 1]
        shaft.reset()
        for harmonic, amp in BASELINE_HARMONICS:
            shaft.add_harmonic(row, harmonic, amp, base.uniform(0.0, 2 * np.pi))
    supply = speed + slip
    common_phase = base.uniform(0.0, 2 * np.pi)
    for phase_idx, ch in enumerate(sorted(CURRENT_CHANNELS)):
        offset = common_phase - phase_idx * 2 * np.pi / 3
        out[ch - 1] += CURRENT_FUNDAMENTAL_AMPLITUDE * np.sin(2 * np.pi * supply * t + offset)
        out[ch - 1] += CURRENT_THIRD_HARMONIC_AMPLITUDE * np.sin(2 * np.pi * 3 * supply * t + offset)
    if noise_level > 0:
        for ch in range(1, N_CHANNELS + 1):
            scale = CURRENT_NOISE_SCALE * noise_level if ch in CURRENT_CHANNELS else noise_level
            out[ch - 1] += scale * base.standard_normal(n)

    for code in label.active_codes:
        sig = SIGNATURES[code]
        frng = _rng(seed, _STREAM_FAULT, FAULT_CODES.index(code))
        synth = _CombSynth(
            sig.base_frequency_multiplier * speed, n,
            None if sig.modulation is None else sig.modulation * speed)
        for ch in sorted(sig.home_channels) + sorted(sig.coupled_channels):
            att = 1.0 if ch in sig.home_channels else COUPLING_ATTENUATION
            row = out[ch - 1]
            synth.reset()
            for h in range(1, sig.harmonic_count + 1):
                amp = att * sig.amplitude / math.sqrt(h)
                phase = frng.uniform(0.0, 2 * np.pi)
                if sig.modulation is None:
                    synth.add_harmonic(row, h, amp, phase)
                else:
                    side = (frng.uniform(0.0, 2 * np.pi), frng.uniform(0.0, 2 * np.pi))
                    synth.add_harmonic(row, h, amp, phase, amp / 2, side)

    factor = LOAD_RMS_FACTOR[condition.load_kn]
    if factor != 1.0:
        for ch in ACCEL_CHANNELS:
            out[ch - 1] *= factor

    return Recording(out.astype(np.float32), SAMPLE_RATE, label, condition, int(seed))


@dataclass
class DatasetSpec:
    """Counts per compound label per split, plus generator knobs.

    `counts` maps a catalog label string to {split: count}; `conditions`
    are cycled per label in order. Final-test entries are written with
    their condition marked unknown, mirroring the challenge setting where
    held-out samples carry no working-condition metadata.
    """

    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    conditions: tuple[WorkingCondition, ...] = (WorkingCondition(40.0, 0.0),)
    duration_s: float = 1.0
    noise_level: float = 0.05
    hide_final_test_condition: bool = True

    SPLITS = ("train", "val", "test_prelim", "test_final")

    def validate(self):
        for label_str, per_split in self.counts.items():
            parse_label(label_str)
            for split, count in per_split.items():
                if split not in self.SPLITS:
                    raise InvalidLabel(f"unknown split {split!r} for label {label_str}")
                if count < 0:
                    raise InvalidLabel(f"negative count for {label_str}/{split}")

    @classmethod
    def desk_scale(cls, train_per_single: int = 2, normals_train: int = 6,
                   compounds_train: int = 1, final_per_label: int = 1,
                   conditions: tuple[WorkingCondition, ...] = (WorkingCondition(40.0, 0.0),),
                   noise_level: float = 0.05) -> "DatasetSpec":
        """Small dataset mirroring the catalog's split pattern.

        Training draws from catalog rows present in the train split
        (singles, normals, and the five training compounds); validation
        takes 10 recordings biased toward the compounds so most faults
        have at least one positive; the final test covers every catalog
        row.
        """
        counts: dict[str, dict[str, int]] = {}

        def add(label, split, k):
            if k > 0:
                counts.setdefault(label, {})
                counts[label][split] = counts[label].get(split, 0) + k

        train_labels = catalog_labels("train")
        singles = [l for l in train_labels if len(parse_label(l).active_codes) == 1]
        compounds = [l for l in train_labels if len(parse_label(l).active_codes) > 1]
        add("M0_G0_LA0_RA0", "train", normals_train)
        for label in singles:
            add(label, "train", train_per_single)
        for label in compounds:
            add(label, "train", compounds_train)
        add("M0_G0_LA0_RA0", "val", 2)
        for label in compounds:
            add(label, "val", 1)
        for i in (1, 4, 14):
            add(singles[i], "val", 1)
        for label in catalog_labels("test_final"):
            add(label, "test_final", final_per_label)
        return cls(counts=counts, conditions=tuple(conditions), noise_level=noise_level)
