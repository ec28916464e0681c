"""Euclidean and softmax cross-entropy losses with exact gradients."""

from __future__ import annotations

import numpy as np

from .tensor import TensorError

NORMALIZATIONS = ("per_image", "per_pixel")


def euclidean_loss(pred: np.ndarray, target: np.ndarray, normalization: str = "per_pixel"):
    """Batch-mean squared L2 distance.

    ``per_image`` is ``(1/N) sum_i ||Y_i - F(X_i)||^2``; ``per_pixel``
    additionally divides by ``c*h*w``. Returns ``(loss, grad_pred)``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise TensorError(f"pred shape {pred.shape} != target shape {target.shape}")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    n = pred.shape[0]
    denom = n if normalization == "per_image" else pred.size
    diff = pred - target
    loss = float(np.sum(diff * diff)) / denom
    return loss, (2.0 / denom) * diff


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray, ignore_index: int | None = None):
    """Mean per-pixel negative log-likelihood over non-ignored pixels.

    ``logits`` is ``(n, classes, h, w)``, ``labels`` integer ``(n, h, w)``.
    Returns ``(loss, grad_logits)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k, h, w = logits.shape
    if labels.shape != (n, h, w):
        raise TensorError(f"labels shape {labels.shape} != {(n, h, w)}")
    labels = labels.astype(np.int64)
    valid = np.ones(labels.shape, dtype=bool) if ignore_index is None else labels != ignore_index
    if np.any((labels[valid] < 0) | (labels[valid] >= k)):
        raise ValueError(f"label out of range [0, {k})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    safe = np.where(valid, labels, 0)
    picked = np.take_along_axis(log_p, safe[:, None], axis=1)[:, 0]
    count = int(valid.sum())
    if count == 0:
        return 0.0, np.zeros_like(logits)
    loss = float(-picked[valid].sum()) / count

    grad = np.exp(log_p)
    np.put_along_axis(grad, safe[:, None], np.take_along_axis(grad, safe[:, None], axis=1) - 1.0, axis=1)
    grad *= valid[:, None] / count
    return loss, grad


def loss_and_grad(kind: str, pred, target, normalization: str = "per_pixel"):
    if kind == "euclidean":
        return euclidean_loss(pred, target, normalization)
    if kind == "softmax":
        return softmax_cross_entropy(pred, target)
    raise ValueError(f"unknown loss kind {kind!r}")
