"""Threshold, curve, segmentation and image-quality metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _precision(tp, fp, fn):
    if tp + fp == 0:
        return 1.0 if tp + fn == 0 else 0.0
    return tp / (tp + fp)


def _recall(tp, fn):
    return tp / (tp + fn) if tp + fn else 1.0


def _f_measure(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class BinaryScores:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f_measure: float


def binary_metrics(prob, truth, threshold: float) -> BinaryScores:
    """Confusion counts and scores with prediction ``prob >= threshold``."""
    prob = np.asarray(prob, dtype=np.float64)
    truth = np.asarray(truth)
    if prob.shape != truth.shape:
        raise ValueError(f"shape mismatch {prob.shape} vs {truth.shape}")
    pred = prob >= threshold
    pos = truth.astype(bool)
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(pred.size - tp - fp - fn)
    p = _precision(tp, fp, fn)
    r = _recall(tp, fn)
    return BinaryScores(ConfusionCounts(tp, fp, tn, fn), (tp + tn) / pred.size, p, r, _f_measure(p, r))


@dataclass
class Curve:
    kind: str  # "pr" (x=recall, y=precision) or "roc" (x=fpr, y=tpr)
    thresholds: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "x", "y"])
            for t, x, y in zip(self.thresholds, self.x, self.y):
                w.writerow([_fmt(t), _fmt(x), _fmt(y)])


@dataclass
class SweepResult:
    pr: Curve
    roc: Curve
    auc_roc: float
    peak_threshold: float
    peak_f: float


def sweep_curves(probs, truths) -> SweepResult:
    """PR and ROC curves over every distinct score, ROC AUC and the peak-F threshold.

    ``probs``/``truths`` may be single arrays or lists of arrays (pooled).
    Thresholds run from a sentinel above the maximum score down to the
    minimum; ties in F resolve to the highest threshold.
    """
    if isinstance(probs, (list, tuple)):
        probs = np.concatenate([np.ravel(p) for p in probs])
        truths = np.concatenate([np.ravel(t) for t in truths])
    s = np.ravel(np.asarray(probs, dtype=np.float64))
    y = np.ravel(np.asarray(truths)).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and truth differ in size")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate truth: need at least one positive and one negative pixel")

    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    thresholds = np.r_[s[0] + 1.0, s[ends]]
    tp = np.r_[0, tp].astype(np.float64)
    fp = np.r_[0, fp].astype(np.float64)
    fn = n_pos - tp

    tpr = tp / n_pos
    fpr = fp / n_neg
    precision = np.array([_precision(a, b, c) for a, b, c in zip(tp, fp, fn)])
    recall = tpr
    f = np.array([_f_measure(p, r) for p, r in zip(precision, recall)])
    best = int(np.argmax(f))  # first max == highest threshold
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return SweepResult(
        Curve("pr", thresholds, recall, precision),
        Curve("roc", thresholds, fpr, tpr),
        auc,
        float(thresholds[best]),
        float(f[best]),
    )


def pairwise_auc(scores, truth) -> float:
    """Probability a random positive outscores a random negative, ties counting one half."""
    s = np.ravel(np.asarray(scores, dtype=np.float64))
    y = np.ravel(np.asarray(truth)).astype(bool)
    pos, neg = s[y], s[~y]
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


@dataclass
class SegmentationScores:
    accuracy: float
    class_mean: float
    mean_iou: float
    confusion: np.ndarray


def confusion_matrix(pred, truth, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted."""
    pred = np.ravel(np.asarray(pred)).astype(np.int64)
    truth = np.ravel(np.asarray(truth)).astype(np.int64)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth differ in size")
    for name, lab in (("prediction", pred), ("truth", truth)):
        if lab.size and (lab.min() < 0 or lab.max() >= n_classes):
            raise ValueError(f"{name} label out of range [0, {n_classes})")
    return np.bincount(truth * n_classes + pred, minlength=n_classes**2).reshape(n_classes, n_classes)


def segmentation_metrics(pred, truth, n_classes: int) -> SegmentationScores:
    """Global accuracy, mean recall over classes present in truth, mean IoU over
    classes with a nonzero union."""
    cm = confusion_matrix(pred, truth, n_classes)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    union = support + predicted - tp
    accuracy = tp.sum() / cm.sum()
    present = support > 0
    class_mean = float(np.mean(tp[present] / support[present]))
    nz = union > 0
    mean_iou = float(np.mean(tp[nz] / union[nz]))
    return SegmentationScores(float(accuracy), class_mean, mean_iou, cm)


def psnr(clean, test, max_val: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a = np.asarray(clean, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_val**2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    g /= g.sum()
    return g


def _filter_valid(img, g):
    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim(clean, test, max_val: float = 255.0) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), valid window positions only."""
    a = np.asarray(clean, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    a = a[..., 0] if a.ndim == 3 else a
    b = b[..., 0] if b.ndim == 3 else b
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < 11:
        raise ValueError(f"image {a.shape} smaller than the 11x11 SSIM window")
    c1 = (0.01 * max_val) ** 2
    c2 = (0.03 * max_val) ** 2
    g = _gaussian_window()
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ------------------------------------------------------------------ reports


def _fmt(v) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


@dataclass
class MetricReport:
    task: str
    scalars: dict = field(default_factory=dict)  # (group, name) -> value
    curves: dict = field(default_factory=dict)  # kind -> Curve

    def add(self, group: str, name: str, value: float):
        self.scalars[(group, name)] = float(value)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "name", "value"])
            for (group, name), value in self.scalars.items():
                w.writerow([group, name, _fmt(value)])
