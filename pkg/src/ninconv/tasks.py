"""Task glue: manifest -> training arrays, checkpoint + image -> prediction."""

from __future__ import annotations

import numpy as np

from . import graph
from .checkpoint import Checkpoint
from .data import (
    Image,
    channel_mean,
    extract_patches,
    inference_decimate,
    load_netpbm,
    mean_add,
    mean_subtract,
    quantize,
    restore_output,
    skin_input_windows,
    to_tensor,
)
from .inception import network_spec
from .tensor import bilinear_resize


class TaskMismatch(ValueError):
    pass


def load_pairs(manifest):
    return [(load_netpbm(a), load_netpbm(b)) for a, b in manifest.entries]


def training_arrays(task: str, pairs, patch_stride: int = 20):
    """Stack every training sample of ``pairs`` into ``(X, Y, mean)``.

    Inputs are scaled to [0, 1] and mean-subtracted with the per-channel mean
    of the training inputs. Restoration targets get the same shift; skin
    targets are binary maps and segmentation targets class-index maps.
    """
    if not pairs:
        raise ValueError("empty training set")
    mean = channel_mean([img for img, _ in pairs])
    xs, ys = [], []
    if task == "skin":
        for img, lab in pairs:
            for s in skin_input_windows(img, lab):
                xs.append(s.input)
                ys.append(s.target)
    elif task == "restoration":
        for degraded, clean in pairs:
            for s in extract_patches(degraded, clean, stride=patch_stride):
                xs.append(s.input)
                ys.append(s.target - mean[:, None, None])
    elif task == "segmentation":
        shapes = {img.pixels.shape[:2] for img, _ in pairs}
        if len(shapes) != 1:
            raise ValueError(f"segmentation images must share one size, got {sorted(shapes)}")
        for img, lab in pairs:
            xs.append(to_tensor(img)[0])
            ys.append(lab.gray().astype(np.int64))
    else:
        raise ValueError(f"unknown task {task!r}")
    X = mean_subtract(np.stack(xs), mean)
    return X, np.stack(ys), mean


def _check_input(ckpt: Checkpoint, image: Image):
    if image.channels != ckpt.arch.input_channels:
        raise TaskMismatch(
            f"{ckpt.arch.task} checkpoint expects {ckpt.arch.input_channels}-channel input, "
            f"image has {image.channels}"
        )


def predict(ckpt: Checkpoint, image: Image, net=None) -> np.ndarray:
    """Raw network result at the original image size.

    skin: probability map (h, w) clamped to [0, 1]; segmentation: logits
    (classes, h, w); restoration: intensities (h, w) on the [0, 1] scale.
    """
    _check_input(ckpt, image)
    net = net or network_spec(ckpt.arch)
    task = ckpt.arch.task
    if task == "skin":
        x = mean_subtract(inference_decimate(image), ckpt.mean)
        out, _ = graph.forward(net, ckpt.params, x)
        full = bilinear_resize(out, image.height, image.width)
        return np.clip(full[0, 0], 0.0, 1.0)
    x = mean_subtract(to_tensor(image), ckpt.mean)
    out, _ = graph.forward(net, ckpt.params, x)
    if task == "segmentation":
        return out[0]
    return mean_add(out, ckpt.mean)[0, 0]


def render(ckpt: Checkpoint, prediction: np.ndarray) -> Image:
    """8-bit export of :func:`predict` output. Segmentation argmax ties go to
    the lowest class index."""
    task = ckpt.arch.task
    if task == "skin":
        return restore_output(prediction, *prediction.shape)
    if task == "segmentation":
        return Image(np.argmax(prediction, axis=0).astype(np.uint8))
    return Image(quantize(prediction))
