"""Seeded synthetic image sets for desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .data import Image


def gradient_rectangles(n: int, size: int = 64, seed: int = 0) -> list[Image]:
    """Grayscale images: a random smooth linear/quadratic ramp plus a few flat rectangles."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    images = []
    for _ in range(n):
        a, b, c, d = rng.uniform(-1, 1, size=4)
        img = 128 + 70 * (a * xx + b * yy) + 40 * (c * xx * xx + d * yy * yy)
        for _ in range(rng.integers(2, 5)):
            h, w = rng.integers(size // 8, size // 2, size=2)
            y0 = rng.integers(0, size - h)
            x0 = rng.integers(0, size - w)
            img[y0 : y0 + h, x0 : x0 + w] = rng.uniform(20, 235)
        images.append(Image(np.clip(np.round(img), 0, 255).astype(np.uint8)))
    return images


def disks_on_texture(n: int, size: int = 50, seed: int = 0):
    """Two-class scenes: smooth bright disks (class 1) over a noisy textured background.

    Returns a list of ``(rgb Image, label Image)``; label pixels are class indices {0, 1}.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    out = []
    for _ in range(n):
        base = rng.uniform(60, 140)
        texture = base + 35 * rng.standard_normal((size, size))
        texture += 20 * np.sin(xx * rng.uniform(0.5, 1.5) + yy * rng.uniform(0.5, 1.5))
        label = np.zeros((size, size), dtype=np.uint8)
        for _ in range(rng.integers(1, 4)):
            r = rng.uniform(5, 12)
            cy, cx = rng.uniform(r, size - r, size=2)
            label[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 1
        disk = rng.uniform(150, 220)
        gray = np.where(label == 1, disk + 4 * rng.standard_normal((size, size)), texture)
        tint = np.array([1.0, 0.85, 0.7])
        rgb = np.clip(np.round(gray[:, :, None] * tint), 0, 255).astype(np.uint8)
        out.append((Image(rgb), Image(label)))
    return out
