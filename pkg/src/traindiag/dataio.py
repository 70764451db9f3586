"""On-disk dataset layout: recording files and the split manifest.

Recording format: a fixed 256-byte ASCII header (magic/version, channel
count, sample rate, length, label string, condition or "unknown", seed)
followed by the samples as little-endian float32, channel-major. Loading
a saved recording reproduces the samples bit-exactly.

Manifest format: a version line, then one tab-separated line per file
(relative path, label, condition or "unknown", split).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadHeader, BadManifest, ChannelCountMismatch, InvalidFaultCode,
    InvalidLabel, TruncatedPayload,
)
from .labels import CompoundLabel, FAULT_CODES, format_label, parse_label
from .synth import (
    DatasetSpec, N_CHANNELS, Recording, WorkingCondition, generate_recording,
)

RECORDING_MAGIC = "TDREC"
RECORDING_VERSION = 1
HEADER_BYTES = 256
MANIFEST_MAGIC = "traindiag-manifest"
MANIFEST_VERSION = 1


def _format_condition(condition: WorkingCondition | None) -> str:
    if condition is None:
        return "unknown"
    return f"{condition.speed_hz:g},{condition.load_kn:g}"


def _parse_condition(text: str) -> WorkingCondition | None:
    if text == "unknown":
        return None
    try:
        speed, load = text.split(",")
        return WorkingCondition(float(speed), float(load))
    except ValueError as exc:
        raise BadHeader(f"bad condition field {text!r}") from exc


def save_recording(recording: Recording, path) -> None:
    path = Path(path)
    header = " ".join([
        RECORDING_MAGIC,
        str(RECORDING_VERSION),
        str(recording.channels.shape[0]),
        f"{recording.sample_rate:g}",
        str(recording.n_samples),
        format_label(recording.label),
        _format_condition(recording.condition),
        str(recording.seed),
    ]).encode("ascii")
    if len(header) > HEADER_BYTES:
        raise BadHeader(f"header too long ({len(header)} bytes)")
    payload = np.ascontiguousarray(recording.channels, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.ljust(HEADER_BYTES, b"\0"))
        fh.write(payload)


def load_recording(path) -> Recording:
    path = Path(path)
    with open(path, "rb") as fh:
        raw_header = fh.read(HEADER_BYTES)
        if len(raw_header) < HEADER_BYTES:
            raise BadHeader(f"{path}: file shorter than the {HEADER_BYTES}-byte header")
        fields = raw_header.rstrip(b"\0").decode("ascii", errors="replace").split(" ")
        if len(fields) != 8 or fields[0] != RECORDING_MAGIC:
            raise BadHeader(f"{path}: not a {RECORDING_MAGIC} recording")
        if fields[1] != str(RECORDING_VERSION):
            raise BadHeader(f"{path}: unsupported version {fields[1]!r}")
        try:
            n_channels = int(fields[2])
            sample_rate = float(fields[3])
            n_samples = int(fields[4])
            label = parse_label(fields[5])
            condition = _parse_condition(fields[6])
            seed = int(fields[7])
        except (ValueError, InvalidLabel, BadHeader) as exc:
            raise BadHeader(f"{path}: malformed header fields ({exc})") from exc
        if n_channels != N_CHANNELS:
            raise ChannelCountMismatch(f"{path}: header says {n_channels} channels, expected {N_CHANNELS}")
        expected = n_channels * n_samples * 4
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedPayload(
                f"{path}: payload has {len(payload)} bytes, header promises {expected}")
    channels = np.frombuffer(payload, dtype="<f4").reshape(n_channels, n_samples).copy()
    return Recording(channels, sample_rate, label, condition, seed)


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the manifest's directory
    label: CompoundLabel
    condition: WorkingCondition | None
    split: str


@dataclass
class DatasetManifest:
    root: Path
    entries: list[ManifestEntry]

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    @property
    def path(self) -> Path:
        return self.root / "manifest.tsv"


def write_manifest(manifest: DatasetManifest) -> None:
    lines = [f"{MANIFEST_MAGIC} {MANIFEST_VERSION}"]
    for e in manifest.entries:
        lines.append("\t".join([e.path, format_label(e.label), _format_condition(e.condition), e.split]))
    manifest.path.write_text("\n".join(lines) + "\n", encoding="ascii")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.tsv"
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except OSError as exc:
        raise BadManifest(f"cannot read manifest {path}: {exc}") from exc
    if not lines or lines[0].split() != [MANIFEST_MAGIC, str(MANIFEST_VERSION)]:
        raise BadManifest(f"{path}: missing or unsupported manifest header")
    entries = []
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise BadManifest(f"{path}:{i}: expected 4 tab-separated fields")
        rel, label_str, cond_str, split = parts
        if rel in seen:
            raise BadManifest(f"{path}:{i}: duplicate path {rel!r}")
        seen.add(rel)
        if split not in DatasetSpec.SPLITS:
            raise BadManifest(f"{path}:{i}: unknown split {split!r}")
        if not (path.parent / rel).exists():
            raise BadManifest(f"{path}:{i}: referenced file {rel!r} does not exist")
        try:
            condition = _parse_condition(cond_str)
        except BadHeader as exc:
            raise BadManifest(f"{path}:{i}: {exc}") from exc
        entries.append(ManifestEntry(rel, parse_label(label_str), condition, split))
    return DatasetManifest(path.parent, entries)


def build_dataset(spec: DatasetSpec, out_dir, seed: int = 0) -> DatasetManifest:
    """Generate, save, and index every recording the spec asks for.

    One file per recording; recording seeds derive from (seed, running
    index) so the dataset is reproducible byte-for-byte. Conditions cycle
    through spec.conditions per split in label order. Final-test entries
    are written with condition "unknown" when the spec hides it.
    """
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    index = 0
    for split in DatasetSpec.SPLITS:
        cond_cursor = 0
        for label_str, per_split in spec.counts.items():
            count = per_split.get(split, 0)
            for _ in range(count):
                condition = spec.conditions[cond_cursor % len(spec.conditions)]
                cond_cursor += 1
                rec_seed = int(np.random.SeedSequence((seed, index)).generate_state(1)[0])
                recording = generate_recording(
                    label_str, condition, spec.duration_s, spec.noise_level, rec_seed)
                hide = spec.hide_final_test_condition and split == "test_final"
                if hide:
                    recording.condition = None
                name = f"{split}_{index:05d}.rec"
                save_recording(recording, out_dir / name)
                entries.append(ManifestEntry(
                    name, recording.label, None if hide else condition, split))
                index += 1
    manifest = DatasetManifest(out_dir, entries)
    write_manifest(manifest)
    return manifest


def binary_labels(manifest: DatasetManifest, fault_code: str,
                  split: str | None = None) -> list[tuple[ManifestEntry, int]]:
    """Per-entry 0/1 view of the manifest for one fault code."""
    if fault_code not in FAULT_CODES:
        raise InvalidFaultCode(f"unknown fault code {fault_code!r}")
    entries = manifest.entries if split is None else manifest.split(split)
    return [(e, int(e.label.has_fault(fault_code))) for e in entries]
