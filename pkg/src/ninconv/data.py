"""Image I/O, input/output windowing for the three tasks, and a block-DCT degrader."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dctn, idctn

from .tensor import bilinear_resize

SKIN_SIDE = 50
PATCH_SIZE = 37


class NetpbmError(ValueError):
    pass


@dataclass
class Image:
    """8-bit image stored as ``(height, width, channels)`` uint8, channels 1 or 3."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"image must be (h, w, 1|3), got {px.shape}")
        self.pixels = np.ascontiguousarray(px, dtype=np.uint8)

    height = property(lambda self: self.pixels.shape[0])
    width = property(lambda self: self.pixels.shape[1])
    channels = property(lambda self: self.pixels.shape[2])

    def gray(self) -> np.ndarray:
        return self.pixels[:, :, 0]


def _read_token(buf: bytes, pos: int):
    """Skip whitespace and ``#`` comments, then read one header token."""
    n = len(buf)
    while pos < n:
        ch = buf[pos : pos + 1]
        if ch == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise NetpbmError(f"truncated header at byte {start}")
    return buf[start:pos], start, pos


def parse_netpbm(buf: bytes) -> Image:
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise NetpbmError(f"unsupported magic {magic!r} at byte 0 (need binary P5 or P6)")
    pos = 2
    values = []
    for label in ("width", "height", "maxval"):
        tok, start, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise NetpbmError(f"bad {label} {tok!r} at byte {start}")
        values.append(int(tok))
    width, height, maxval = values
    if maxval != 255:
        raise NetpbmError(f"unsupported depth: maxval {maxval} (only 255) at byte {start}")
    if width < 1 or height < 1:
        raise NetpbmError(f"empty image {width}x{height}")
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise NetpbmError(f"missing whitespace after maxval at byte {pos}")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    data = buf[pos : pos + need]
    if len(data) < need:
        raise NetpbmError(f"truncated raster at byte {pos + len(data)}: need {need} bytes, have {len(data)}")
    px = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels)
    return Image(px.copy())


def load_netpbm(path) -> Image:
    with open(path, "rb") as fh:
        return parse_netpbm(fh.read())


def save_netpbm(image: Image, path):
    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + f"\n{image.width} {image.height}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + image.pixels.tobytes())


# ------------------------------------------------------------ conversions


def to_tensor(image: Image) -> np.ndarray:
    """(1, c, h, w) float64 tensor scaled to [0, 1]."""
    return image.pixels.transpose(2, 0, 1)[None].astype(np.float64) / 255.0


def quantize(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and map to 8-bit with round-half-up."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def from_tensor(t: np.ndarray) -> Image:
    """Inverse of :func:`to_tensor` for one sample, clamping to the 8-bit range."""
    return Image(quantize(t[0].transpose(1, 2, 0)))


def mean_subtract(t: np.ndarray, mean) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    if mean.size != t.shape[1]:
        raise ValueError(f"mean has {mean.size} channels, tensor has {t.shape[1]}")
    return t - mean[None, :, None, None]


def mean_add(t: np.ndarray, mean) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    return t + mean[None, :, None, None]


def channel_mean(images) -> np.ndarray:
    """Per-channel mean intensity on the [0, 1] scale over a list of images."""
    total = None
    count = 0
    for img in images:
        s = img.pixels.reshape(-1, img.channels).astype(np.float64).sum(axis=0)
        total = s if total is None else total + s
        count += img.height * img.width
    if total is None:
        raise ValueError("cannot compute a mean over zero images")
    return total / count / 255.0


# ------------------------------------------------------- windowing designs


@dataclass
class SamplePair:
    input: np.ndarray  # (c, h, w)
    target: np.ndarray  # (c, h, w) float or (h, w) class indices
    source: str = ""
    offset: tuple = (0, 0)


def decimated_size(height: int, width: int, side: int = SKIN_SIDE) -> tuple[int, int]:
    """Size with the smaller side mapped to ``side``, aspect preserved (round half up)."""
    if min(height, width) < 2:
        raise ValueError(f"degenerate image {height}x{width}")
    short = min(height, width)

    def scale(n):
        return side if n == short else int(math.floor(n * side / short + 0.5))

    return scale(height), scale(width)


def window_offsets(length: int, size: int, stride: int) -> list[int]:
    """Regular offsets plus one final window flush with the far border."""
    if length < size:
        raise ValueError(f"length {length} shorter than window {size}")
    offs = list(range(0, length - size + 1, stride))
    if offs[-1] != length - size:
        offs.append(length - size)
    return offs


def inference_decimate(image: Image) -> np.ndarray:
    t = to_tensor(image)
    h, w = decimated_size(image.height, image.width)
    return bilinear_resize(t, h, w)


def restore_output(prob_map: np.ndarray, height: int, width: int) -> Image:
    """Resize a (h, w) or (1, 1, h, w) map to the original size and export as 8-bit."""
    m = np.asarray(prob_map, dtype=np.float64)
    if m.ndim == 2:
        m = m[None, None]
    return from_tensor(bilinear_resize(m, height, width))


def skin_input_windows(image: Image, label: Image, source: str = "") -> list[SamplePair]:
    """Decimate so the short side is 50 and tile 50x50 windows along the long side."""
    if (image.height, image.width) != (label.height, label.width):
        raise ValueError("image and label sizes differ")
    x = inference_decimate(image)[0]
    h, w = x.shape[1:]
    mask = (label.gray() > 0).astype(np.float64)[None, None]
    y = (bilinear_resize(mask, h, w)[0] >= 0.5).astype(np.float64)
    pairs = []
    for oy in window_offsets(h, SKIN_SIDE, SKIN_SIDE):
        for ox in window_offsets(w, SKIN_SIDE, SKIN_SIDE):
            sl = np.s_[:, oy : oy + SKIN_SIDE, ox : ox + SKIN_SIDE]
            pairs.append(SamplePair(x[sl].copy(), y[sl].copy(), source, (oy, ox)))
    return pairs


def extract_patches(degraded: Image, clean: Image, size: int = PATCH_SIZE, stride: int = 20, source: str = "") -> list[SamplePair]:
    """Aligned (degraded, clean) patch pairs on a regular grid with border-aligned last row/column."""
    if (degraded.height, degraded.width) != (clean.height, clean.width):
        raise ValueError("degraded and clean sizes differ")
    if degraded.height < size or degraded.width < size:
        raise ValueError(f"image {degraded.height}x{degraded.width} smaller than patch {size}")
    x = to_tensor(degraded)[0]
    y = to_tensor(clean)[0]
    pairs = []
    for oy in window_offsets(degraded.height, size, stride):
        for ox in window_offsets(degraded.width, size, stride):
            sl = np.s_[:, oy : oy + size, ox : ox + size]
            pairs.append(SamplePair(x[sl].copy(), y[sl].copy(), source, (oy, ox)))
    return pairs


# ----------------------------------------------------------------- manifest


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)  # (input path, label path)
    path: str = ""

    def __len__(self):
        return len(self.entries)


def read_manifest(path) -> DatasetManifest:
    """Tab-separated ``input<TAB>label`` lines; ``#`` starts a comment.

    Relative paths resolve against the manifest's directory.
    """
    base = Path(path).resolve().parent
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected input<TAB>label")
            entries.append(tuple(str(base / p.strip()) for p in parts))
    for inp, lab in entries:
        for p in (inp, lab):
            if not os.path.exists(p):
                raise FileNotFoundError(f"manifest {path}: missing file {p}")
    return DatasetManifest(entries, str(path))


def write_manifest(entries, path):
    base = Path(path).resolve().parent
    with open(path, "w") as fh:
        for inp, lab in entries:
            fh.write(f"{os.path.relpath(inp, base)}\t{os.path.relpath(lab, base)}\n")


# ------------------------------------------------------------- DCT degrader

BASE_LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


def quality_table(quality: int) -> np.ndarray:
    """Luminance quantization table scaled to a 1..100 quality factor."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.clip((BASE_LUMINANCE_TABLE * scale + 50) // 100, 1, 255)


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def dct_degrade(image: Image, quality: int) -> Image:
    """Quantize 8x8 block DCT coefficients of a grayscale image."""
    if image.channels != 1:
        raise ValueError("dct_degrade expects a grayscale image")
    table = quality_table(quality).astype(np.float64)
    g = image.gray().astype(np.float64)
    h, w = g.shape
    ph, pw = -h % 8, -w % 8
    padded = np.pad(g, ((0, ph), (0, pw)), mode="edge") - 128.0
    H, W = padded.shape
    blocks = padded.reshape(H // 8, 8, W // 8, 8).transpose(0, 2, 1, 3)
    coef = dctn(blocks, type=2, axes=(2, 3), norm="ortho")
    coef = _round_half_away(coef / table) * table
    rec = idctn(coef, type=2, axes=(2, 3), norm="ortho")
    rec = rec.transpose(0, 2, 1, 3).reshape(H, W)[:h, :w] + 128.0
    out = np.floor(np.clip(rec, 0.0, 255.0) + 0.5)
    return Image(out.astype(np.uint8))
