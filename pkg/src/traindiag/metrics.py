"""Evaluation metrics, report assembly, and latent-space PCA export.

The challenge's composite score is Z = 0.4*Acc + 0.2*Prec + 0.2*Rec +
0.2*F1. Precision, recall and F1 are defined as 0 when their denominator
is 0 (the preliminary test set legitimately contains a fault with zero
anomalies, so this case is ordinary, not exceptional).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyEvaluation, InvalidK, ShapeError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(decisions, truths) -> ConfusionCounts:
    """Count tp/tn/fp/fn from parallel binary sequences."""
    decisions = np.asarray(decisions)
    truths = np.asarray(truths)
    if decisions.shape != truths.shape:
        raise ShapeError(f"decisions {decisions.shape} vs truths {truths.shape}")
    if not np.all(np.isin(decisions, (0, 1))) or not np.all(np.isin(truths, (0, 1))):
        raise ShapeError("confusion inputs must be binary")
    d = decisions.astype(bool)
    t = truths.astype(bool)
    return ConfusionCounts(
        tp=int(np.sum(d & t)),
        tn=int(np.sum(~d & ~t)),
        fp=int(np.sum(d & ~t)),
        fn=int(np.sum(~d & t)),
    )


@dataclass(frozen=True)
class MetricSummary:
    accuracy: float
    precision: float
    recall: float
    f1: float
    z: float


def z_metric(counts: ConfusionCounts) -> MetricSummary:
    """Accuracy, precision, recall, F1 and the composite Z score."""
    total = counts.total
    if total == 0:
        raise EmptyEvaluation("no samples evaluated")
    acc = (counts.tp + counts.tn) / total
    prec = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    rec = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    z = 0.4 * acc + 0.2 * (prec + rec + f1)
    return MetricSummary(acc, prec, rec, f1, z)


@dataclass
class FaultMetrics:
    counts: ConfusionCounts
    metrics: MetricSummary


@dataclass
class EvalReport:
    """Per-fault confusion/metrics plus the aggregate summary.

    Recording-level decisions drive the per-fault metrics; the slice-level
    mean accuracy is reported separately because the two differ whenever
    recordings hold several slices.
    """

    per_fault: dict[str, FaultMetrics] = field(default_factory=dict)
    compound_exact_match: float = float("nan")
    slice_mean_accuracy: float = float("nan")
    flops: int | None = None
    tag: str = ""

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.metrics.accuracy for m in self.per_fault.values()]))

    @property
    def mean_z(self) -> float:
        return float(np.mean([m.metrics.z for m in self.per_fault.values()]))

    def render(self) -> str:
        lines = []
        title = f"evaluation report{' [' + self.tag + ']' if self.tag else ''}"
        lines.append(title)
        lines.append(f"{'fault':<6} {'tp':>4} {'tn':>4} {'fp':>4} {'fn':>4} "
                     f"{'acc':>7} {'prec':>7} {'rec':>7} {'f1':>7} {'z':>7}")
        for code, fm in self.per_fault.items():
            c, m = fm.counts, fm.metrics
            lines.append(f"{code:<6} {c.tp:>4} {c.tn:>4} {c.fp:>4} {c.fn:>4} "
                         f"{m.accuracy:>7.4f} {m.precision:>7.4f} {m.recall:>7.4f} "
                         f"{m.f1:>7.4f} {m.z:>7.4f}")
        lines.append(f"mean accuracy (recording level): {self.mean_accuracy:.4f}")
        lines.append(f"mean accuracy (slice level):     {self.slice_mean_accuracy:.4f}")
        lines.append(f"mean Z:                          {self.mean_z:.4f}")
        lines.append(f"compound exact-match rate:       {self.compound_exact_match:.4f}")
        if self.flops is not None:
            lines.append(f"model FLOPs (per sample):        {self.flops}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        # open() failures already carry the path in the OSError
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fault", "tp", "tn", "fp", "fn",
                             "accuracy", "precision", "recall", "f1", "z"])
            for code, fm in self.per_fault.items():
                c, m = fm.counts, fm.metrics
                writer.writerow([code, c.tp, c.tn, c.fp, c.fn,
                                 repr(m.accuracy), repr(m.precision), repr(m.recall),
                                 repr(m.f1), repr(m.z)])
            writer.writerow(["mean", "", "", "", "",
                             repr(self.mean_accuracy), "", "", "", repr(self.mean_z)])
            writer.writerow(["compound_exact_match", "", "", "", "",
                             repr(self.compound_exact_match), "", "", "", ""])
            writer.writerow(["slice_mean_accuracy", "", "", "", "",
                             repr(self.slice_mean_accuracy), "", "", "", ""])
            if self.flops is not None:
                writer.writerow(["flops", self.flops, "", "", "", "", "", "", "", ""])


@dataclass
class PCAResult:
    projected: np.ndarray       # (n, k)
    eigenvalues: np.ndarray     # top-k, descending
    explained_ratio: np.ndarray  # eigenvalues / total variance
    components: np.ndarray      # (k, d), orthonormal rows


def pca_project(latent: np.ndarray, k: int = 32) -> PCAResult:
    """Project mean-centered rows onto the top-k covariance eigenvectors."""
    x = np.asarray(latent, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ShapeError(f"need a (samples >= 2, features) matrix, got {x.shape}")
    if k > x.shape[1] or k < 1:
        raise InvalidK(f"k={k} out of range for {x.shape[1]} features")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    top_vals = eigvals[:k]
    components = eigvecs[:, :k].T
    projected = centered @ eigvecs[:, :k]
    ratio = top_vals / total if total > 0 else np.zeros(k)
    return PCAResult(projected, top_vals, ratio, components)


def export_parallel_coordinates(projected: np.ndarray, labels, path) -> None:
    """CSV with header label,pc1..pck, one row per sample."""
    projected = np.asarray(projected)
    labels = list(labels)
    if projected.ndim != 2 or len(labels) != projected.shape[0]:
        raise ShapeError(
            f"{projected.shape[0] if projected.ndim == 2 else '?'} rows vs {len(labels)} labels")
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"pc{i + 1}" for i in range(projected.shape[1])])
        for label, row in zip(labels, projected):
            writer.writerow([label] + [repr(float(v)) for v in row])
