"""Per-fault training, inference, and compound-label assembly.

The multi-label problem is decomposed into 17 binary classifiers, one per
fault code. Each classifier trains on the channels selected for its
component (or all 21 in the all-channels ablation), on either the
normalized half-magnitude spectra (fft) or normalized raw slices (raw).
The checkpoint kept is the epoch with the lowest validation loss, ties
going to the earliest epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataio import DatasetManifest, load_recording
from .errors import (
    AblationIncomplete, BadCheckpoint, EmptyEvaluation, InsufficientPositives,
    InvalidFaultCode, SpeedUnidentified, TrainingDiverged,
)
from .labels import CompoundLabel, FAULT_CODES, format_label, split_fault_code
from .metrics import ConfusionCounts, EvalReport, FaultMetrics, confusion, z_metric
from .nn import (
    Adam, DEFAULT_CONV_WIDTHS, DEFAULT_DENSE_WIDTHS, FaultNet, bce_with_logits,
    load_checkpoint, mse, save_checkpoint,
)
from .nn.losses import _sigmoid
from .preprocess import (
    NormStats, fit_norm_stats, normalize, recording_frames, select_channels,
)
from .synth import N_CHANNELS, Recording

ALL_CHANNELS = tuple(range(1, N_CHANNELS + 1))


@dataclass
class TrainConfig:
    """Training protocol knobs; defaults follow the reference protocol."""

    representation: str = "fft"      # "fft" | "raw"
    channel_mode: str = "selected"   # "selected" | "all"
    model: str = "cnn"               # "cnn" | "sup_conv_ae" | "unsup_ae"
    epochs: int = 100
    batch_size: int = 32
    lr_cnn: float = 1e-4
    lr_dense: float = 1e-3
    lambda0: float = 1.0
    lambda1: float = 0.1
    seed: int = 0
    threshold: float = 0.5
    conv_widths: tuple = DEFAULT_CONV_WIDTHS
    dense_widths: tuple = DEFAULT_DENSE_WIDTHS
    slip_tolerance: float = 5.0

    def validate(self):
        if self.representation not in ("fft", "raw"):
            raise ValueError(f"bad representation {self.representation!r}")
        if self.channel_mode not in ("selected", "all"):
            raise ValueError(f"bad channel_mode {self.channel_mode!r}")
        if self.model not in ("cnn", "sup_conv_ae", "unsup_ae"):
            raise ValueError(f"bad model {self.model!r}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ValueError("loss weights must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_widths"] = list(self.conv_widths)
        d["dense_widths"] = list(self.dense_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["conv_widths"] = tuple(d.get("conv_widths", DEFAULT_CONV_WIDTHS))
        d["dense_widths"] = tuple(d.get("dense_widths", DEFAULT_DENSE_WIDTHS))
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class FrameSet:
    """Stacked per-slice features for one split.

    values: (n_slices, 21, n_features) float32, speeds: (n_slices,),
    rec_index maps each slice to its recording ordinal within the split.
    """

    values: np.ndarray
    speeds: np.ndarray
    labels: list[CompoundLabel]
    rec_index: np.ndarray
    rec_labels: list[CompoundLabel]
    rec_ids: list[str]
    representation: str

    @property
    def n_slices(self) -> int:
        return self.values.shape[0]

    def channel_rows(self, channels: tuple[int, ...]) -> np.ndarray:
        rows = [ch - 1 for ch in channels]
        return np.ascontiguousarray(self.values[:, rows, :])

    def binary_targets(self, fault_code: str) -> np.ndarray:
        return np.array([label.has_fault(fault_code) for label in self.labels], dtype=np.float32)


def build_frame_set(manifest: DatasetManifest, split: str, representation: str = "fft",
                    slip_tolerance: float = 5.0, circular_shift_seed: int | None = None,
                    real_part_only: bool = False) -> FrameSet:
    """Load a split's recordings and stack their un-normalized frames.

    `circular_shift_seed` applies a random circular time shift to every
    recording (all channels shifted together), used by the shift
    robustness ablation.
    """
    entries = manifest.split(split)
    shift_rng = None if circular_shift_seed is None else \
        np.random.default_rng(np.random.SeedSequence((circular_shift_seed, 17)))
    values, speeds, labels, rec_index, rec_labels, rec_ids = [], [], [], [], [], []
    for rec_ord, entry in enumerate(entries):
        recording = load_recording(manifest.resolve(entry))
        if shift_rng is not None:
            shift = int(shift_rng.integers(recording.n_samples))
            recording.channels = np.roll(recording.channels, shift, axis=1)
        frames = recording_frames(
            recording, recording_id=entry.path, representation=representation,
            real_part_only=real_part_only, slip_tolerance=slip_tolerance)
        for frame in frames:
            values.append(frame.values)
            speeds.append(frame.speed)
            labels.append(entry.label)
            rec_index.append(rec_ord)
        rec_labels.append(entry.label)
        rec_ids.append(entry.path)
    if not values:
        raise EmptyEvaluation(f"split {split!r} has no recordings")
    return FrameSet(
        values=np.stack(values),
        speeds=np.asarray(speeds),
        labels=labels,
        rec_index=np.asarray(rec_index),
        rec_labels=rec_labels,
        rec_ids=rec_ids,
        representation=representation,
    )


def fit_stats_on(frame_set: FrameSet) -> NormStats:
    """Min/max per (speed, channel) over every bin of the training split."""
    stats = NormStats(representation=frame_set.representation)
    lo = frame_set.values.min(axis=2)
    hi = frame_set.values.max(axis=2)
    for i in range(frame_set.n_slices):
        speed = float(frame_set.speeds[i])
        for ch in range(N_CHANNELS):
            stats.update(speed, ch + 1, float(lo[i, ch]), float(hi[i, ch]))
    return stats


def apply_stats(frame_set: FrameSet, stats: NormStats) -> FrameSet:
    """Normalized copy of a frame set (out-of-range values not clipped)."""
    out = np.empty_like(frame_set.values)
    for i in range(frame_set.n_slices):
        speed = float(frame_set.speeds[i])
        lo = np.empty(N_CHANNELS, dtype=np.float32)
        span = np.empty(N_CHANNELS, dtype=np.float32)
        for ch in range(N_CHANNELS):
            mn, mx = stats.get(speed, ch + 1)
            lo[ch] = mn
            span[ch] = mx - mn
        degenerate = span == 0
        span[degenerate] = 1.0
        out[i] = (frame_set.values[i] - lo[:, None]) / span[:, None]
        out[i][degenerate] = 0.0
    return FrameSet(out, frame_set.speeds, frame_set.labels, frame_set.rec_index,
                    frame_set.rec_labels, frame_set.rec_ids, frame_set.representation)


def _stable_seed(*parts) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def fault_channels(fault_code: str, config: TrainConfig) -> tuple[int, ...]:
    if fault_code not in FAULT_CODES:
        raise InvalidFaultCode(f"unknown fault code {fault_code!r}")
    if config.channel_mode == "all":
        return ALL_CHANNELS
    component, _ = split_fault_code(fault_code)
    return select_channels(component).channels


@dataclass
class TrainResult:
    fault_code: str
    best_epoch: int
    best_val_loss: float
    log: list[tuple[int, float, float]]
    pos_weight: float
    checkpoint_path: Path | None = None
    net: FaultNet | None = None  # best-epoch network, for in-process use


def _eval_loss(net: FaultNet, x: np.ndarray, y: np.ndarray, config: TrainConfig,
               pos_weight: float, batch_size: int = 16) -> float:
    """Validation objective in eval mode (running batchnorm statistics)."""
    total = 0.0
    for s in range(0, x.shape[0], batch_size):
        xb = x[s:s + batch_size]
        yb = y[s:s + batch_size]
        logits, recon, _ = net.forward(xb, training=False)
        if config.model == "unsup_ae":
            loss = mse(recon, xb)[0]
        else:
            loss = config.lambda0 * bce_with_logits(logits, yb, pos_weight)[0]
            if config.model == "sup_conv_ae":
                loss += config.lambda1 * mse(recon, xb)[0]
        total += loss * xb.shape[0]
    return total / x.shape[0]


def _recon_errors(net: FaultNet, x: np.ndarray, batch_size: int = 16) -> np.ndarray:
    errors = []
    for s in range(0, x.shape[0], batch_size):
        xb = x[s:s + batch_size]
        _, recon, _ = net.forward(xb, training=False)
        diff = (recon - xb).astype(np.float64)
        errors.extend(np.mean(diff * diff, axis=(1, 2)))
    return np.asarray(errors)


def _snapshot(net: FaultNet):
    return ([p.value.copy() for p in net.params()],
            [b.copy() for b in net.eval_buffers()])


def _restore(net: FaultNet, snap):
    values, buffers = snap
    for p, v in zip(net.params(), values):
        p.value = v.copy()
        p.grad = np.zeros_like(v)
    net.set_eval_buffers(buffers)


def train_fault_model(train_frames: FrameSet, val_frames: FrameSet, fault_code: str,
                      config: TrainConfig, out_dir: Path | None = None) -> TrainResult:
    """Train one fault's binary classifier and keep the best-val epoch.

    Deterministic for fixed config/seed: network init, shuffling, and the
    optimizer all derive from (config.seed, fault). The supervised
    autoencoder optimizes lambda0*BCE + lambda1*MSE; the unsupervised
    variant fits reconstruction on binary-normal samples only and stores
    the 95th percentile of its validation reconstruction errors as the
    anomaly threshold.
    """
    config.validate()
    fault_idx = FAULT_CODES.index(fault_code)
    channels = fault_channels(fault_code, config)
    x_all = train_frames.channel_rows(channels)
    y_all = train_frames.binary_targets(fault_code)
    x_val = val_frames.channel_rows(channels)
    y_val = val_frames.binary_targets(fault_code)

    n_pos = int(y_all.sum())
    n_neg = int(y_all.size - n_pos)
    if config.model == "unsup_ae":
        if n_neg == 0:
            raise InsufficientPositives(f"{fault_code}: no normal training samples to reconstruct")
        x_train = x_all[y_all == 0]
        y_train = np.zeros(x_train.shape[0], dtype=np.float32)
        x_val_obj = x_val[y_val == 0] if np.any(y_val == 0) else x_val
        y_val_obj = np.zeros(x_val_obj.shape[0], dtype=np.float32)
        pos_weight = 1.0
    else:
        if n_pos == 0:
            raise InsufficientPositives(f"{fault_code}: no positive training samples")
        x_train, y_train = x_all, y_all
        x_val_obj, y_val_obj = x_val, y_val
        pos_weight = n_neg / n_pos if n_pos else 1.0

    net = FaultNet(
        in_channels=len(channels), input_len=x_train.shape[2], model=config.model,
        conv_widths=config.conv_widths, dense_widths=config.dense_widths,
        seed=_stable_seed(config.seed, 1, fault_idx))
    optimizer = Adam(net.param_groups(config.lr_cnn, config.lr_dense))
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence((int(config.seed), 2, fault_idx)))

    log: list[tuple[int, float, float]] = []
    best = (math.inf, -1, None)  # (val loss, epoch, snapshot)
    n = x_train.shape[0]
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        running, seen = 0.0, 0
        for s in range(0, n, config.batch_size):
            batch = order[s:s + config.batch_size]
            xb = np.ascontiguousarray(x_train[batch])
            yb = y_train[batch]
            logits, recon, _ = net.forward(xb, training=True)
            if config.model == "unsup_ae":
                loss, drecon = mse(recon, xb)
                net.backward(None, drecon)
            else:
                bce, dlogits = bce_with_logits(logits, yb, pos_weight)
                loss = config.lambda0 * bce
                dlogits = config.lambda0 * dlogits
                drecon = None
                if config.model == "sup_conv_ae":
                    rec_loss, drec = mse(recon, xb)
                    loss += config.lambda1 * rec_loss
                    if config.lambda1 > 0:
                        drecon = config.lambda1 * drec
                net.backward(dlogits, drecon)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch)
            optimizer.step()
            running += loss * xb.shape[0]
            seen += xb.shape[0]
        val_loss = _eval_loss(net, x_val_obj, y_val_obj, config, pos_weight)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(epoch)
        log.append((epoch, running / seen, val_loss))
        if val_loss < best[0]:
            best = (val_loss, epoch, _snapshot(net))

    _restore(net, best[2])
    extra = {
        "channels": list(channels),
        "representation": config.representation,
        "channel_mode": config.channel_mode,
        "pos_weight": pos_weight,
        "threshold": config.threshold,
    }
    if config.model == "unsup_ae":
        errors = _recon_errors(net, x_val_obj)
        extra["recon_threshold"] = float(np.percentile(errors, 95.0))

    result = TrainResult(fault_code, best[1], best[0], log, pos_weight, net=net)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = out_dir / f"ckpt_{fault_code}.bin"
        save_checkpoint(ckpt, net, fault_code, best[1], best[0], extra)
        log_dir = out_dir / "logs"
        log_dir.mkdir(exist_ok=True)
        lines = ["epoch\ttrain_loss\tval_loss"]
        lines += [f"{e}\t{tr!r}\t{vl!r}" for e, tr, vl in log]
        (log_dir / f"{fault_code}.log").write_text("\n".join(lines) + "\n")
        result.checkpoint_path = ckpt
    return result


class FaultModelSet:
    """The 17 trained binary classifiers plus shared stats and config."""

    def __init__(self, models: dict[str, tuple[FaultNet, dict]], stats: NormStats,
                 config: TrainConfig):
        missing = [c for c in FAULT_CODES if c not in models]
        if missing:
            raise BadCheckpoint(f"model set incomplete, missing checkpoints for {missing}")
        self.models = models
        self.stats = stats
        self.config = config

    @classmethod
    def load(cls, model_dir) -> "FaultModelSet":
        model_dir = Path(model_dir)
        config_path = model_dir / "config.json"
        if not config_path.exists():
            raise BadCheckpoint(f"{model_dir}: missing config.json")
        config = TrainConfig.from_dict(json.loads(config_path.read_text())["train"])
        stats = NormStats.load(model_dir / "norm_stats.txt")
        models = {}
        for code in FAULT_CODES:
            path = model_dir / f"ckpt_{code}.bin"
            if not path.exists():
                raise BadCheckpoint(f"{model_dir}: missing checkpoint for fault {code} ({path.name})")
            net, header = load_checkpoint(path)
            models[code] = (net, header)
        return cls(models, stats, config)


@dataclass
class Prediction:
    probabilities: dict[str, float]
    decisions: dict[str, int]
    label: CompoundLabel
    threshold: float

    @property
    def label_string(self) -> str:
        return format_label(self.label)


def _fault_probs(net: FaultNet, header: dict, x: np.ndarray) -> np.ndarray:
    """Per-slice anomaly probabilities for one fault's model."""
    probs = []
    for s in range(0, x.shape[0], 16):
        xb = x[s:s + 16]
        logits, recon, _ = net.forward(xb, training=False)
        if net.model == "unsup_ae":
            thr = max(float(header["extra"].get("recon_threshold", 0.0)), 1e-12)
            diff = (recon - xb).astype(np.float64)
            err = np.mean(diff * diff, axis=(1, 2))
            probs.append(err / (err + thr))
        else:
            probs.append(_sigmoid(logits.astype(np.float64)))
    return np.concatenate(probs)


def predict_frames(frame_values: np.ndarray, model_set: FaultModelSet) -> Prediction:
    """Prediction from already-normalized full-channel slices (n, 21, L)."""
    threshold = model_set.config.threshold
    probabilities = {}
    decisions = {}
    for code in FAULT_CODES:
        net, header = model_set.models[code]
        channels = tuple(header["extra"]["channels"])
        rows = [ch - 1 for ch in channels]
        x = np.ascontiguousarray(frame_values[:, rows, :])
        p = float(np.mean(_fault_probs(net, header, x)))
        probabilities[code] = p
        decisions[code] = int(p >= threshold)
    label = CompoundLabel.from_codes([c for c, d in decisions.items() if d])
    return Prediction(probabilities, decisions, label, threshold)


def predict(recording: Recording, model_set: FaultModelSet,
            recording_id: str = "") -> Prediction:
    """End-to-end prediction for one recording.

    Slices, transforms, identifies the speed, normalizes with the training
    statistics, averages per-slice probabilities per fault, thresholds,
    and assembles the compound label.
    """
    config = model_set.config
    try:
        frames = recording_frames(
            recording, recording_id=recording_id,
            representation=config.representation,
            slip_tolerance=config.slip_tolerance)
    except SpeedUnidentified as exc:
        raise SpeedUnidentified(
            exc.peak_hz, f"recording {recording_id or '<unnamed>'}: {exc}") from exc
    normalized = np.stack([normalize(f, model_set.stats).values for f in frames])
    return predict_frames(normalized, model_set)


def evaluate_model_set(model_set: FaultModelSet, frames: FrameSet,
                       with_flops: bool = False, tag: str = "") -> EvalReport:
    """Per-fault confusion metrics over a split's (un-normalized) frames.

    Recording-level decisions come from the mean per-slice probability;
    slice-level accuracy is also reported. The frame set must be
    un-normalized; this applies the model set's own statistics.
    """
    if frames.n_slices == 0:
        raise EmptyEvaluation("no frames to evaluate")
    if frames.representation != model_set.config.representation:
        raise EmptyEvaluation(
            f"frame representation {frames.representation!r} does not match "
            f"model set {model_set.config.representation!r}")
    normalized = apply_stats(frames, model_set.stats)
    n_rec = len(normalized.rec_labels)
    threshold = model_set.config.threshold
    report = EvalReport(tag=tag)
    rec_decisions: dict[str, np.ndarray] = {}
    slice_accs = []
    for code in FAULT_CODES:
        net, header = model_set.models[code]
        channels = tuple(header["extra"]["channels"])
        x = normalized.channel_rows(channels)
        probs = _fault_probs(net, header, x)
        slice_truth = normalized.binary_targets(code).astype(int)
        slice_dec = (probs >= threshold).astype(int)
        slice_accs.append(float(np.mean(slice_dec == slice_truth)))
        rec_prob = np.bincount(normalized.rec_index, weights=probs, minlength=n_rec) \
            / np.bincount(normalized.rec_index, minlength=n_rec)
        rec_dec = (rec_prob >= threshold).astype(int)
        rec_truth = np.array([l.has_fault(code) for l in normalized.rec_labels], dtype=int)
        counts = confusion(rec_dec, rec_truth)
        report.per_fault[code] = FaultMetrics(counts, z_metric(counts))
        rec_decisions[code] = rec_dec
    exact = 0
    for ri, true_label in enumerate(normalized.rec_labels):
        predicted = CompoundLabel.from_codes(
            [c for c in FAULT_CODES if rec_decisions[c][ri]])
        exact += int(predicted == true_label)
    report.compound_exact_match = exact / n_rec
    report.slice_mean_accuracy = float(np.mean(slice_accs))
    if with_flops:
        report.flops = int(np.mean([net.flops() for net, _ in model_set.models.values()]))
    return report


def run_ablation(cells: dict[str, FaultModelSet | None],
                 frame_sets: dict[str, FrameSet]) -> dict[str, EvalReport]:
    """Evaluate one model set per ablation cell on its matching frames.

    `cells` maps a cell name (e.g. "fft-selected") to its model set;
    `frame_sets` maps the cell name to the evaluation frames. A missing
    model set or frame set raises AblationIncomplete.
    """
    reports = {}
    for name, model_set in cells.items():
        if model_set is None:
            raise AblationIncomplete(f"cell {name!r} has no trained model set")
        if name not in frame_sets:
            raise AblationIncomplete(f"cell {name!r} has no evaluation frames")
        reports[name] = evaluate_model_set(model_set, frame_sets[name], tag=name)
    return reports


def train_model_set(manifest: DatasetManifest, config: TrainConfig, out_dir,
                    faults: tuple[str, ...] = FAULT_CODES,
                    frame_cache: dict | None = None) -> tuple[FaultModelSet, list[TrainResult]]:
    """Fit stats, train every requested fault, and persist the set.

    Writes config.json (snapshot), norm_stats.txt, one checkpoint and one
    log per fault. `frame_cache` may carry prebuilt un-normalized frame
    sets keyed by (split, representation) to skip recomputing spectra.
    """
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = frame_cache if frame_cache is not None else {}

    def frames_for(split: str) -> FrameSet:
        key = (split, config.representation)
        if key not in cache:
            cache[key] = build_frame_set(
                manifest, split, config.representation,
                slip_tolerance=config.slip_tolerance)
        return cache[key]

    train_raw = frames_for("train")
    val_raw = frames_for("val")
    stats = fit_stats_on(train_raw)
    stats.save(out_dir / "norm_stats.txt")
    (out_dir / "config.json").write_text(
        json.dumps({"train": config.to_dict()}, indent=2, sort_keys=True) + "\n")
    train_frames = apply_stats(train_raw, stats)
    val_frames = apply_stats(val_raw, stats)
    results = []
    models = {}
    for code in faults:
        result = train_fault_model(train_frames, val_frames, code, config, out_dir)
        results.append(result)
        net, header = load_checkpoint(result.checkpoint_path)
        models[code] = (net, header)
    model_set = FaultModelSet(models, stats, config) if set(faults) == set(FAULT_CODES) else None
    if model_set is None:
        return None, results
    return model_set, results
