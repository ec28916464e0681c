"""Dense NCHW tensor kernels: convolution, ReLU, max pooling, concat, resize.

Tensors are plain ``numpy.ndarray`` values of shape ``(n, c, h, w)`` and
dtype float64. Every op returns a fresh array and never mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class TensorError(ValueError):
    """Raised on shape, channel or finiteness violations."""


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a contiguous float64 4-D array, validating shape."""
    t = np.ascontiguousarray(x, dtype=np.float64)
    if t.ndim != 4:
        raise TensorError(f"expected a 4-D (n, c, h, w) tensor, got shape {t.shape}")
    if min(t.shape) < 1:
        raise TensorError(f"all tensor dimensions must be >= 1, got {t.shape}")
    return t


def check_finite(t: np.ndarray, where: str = "tensor") -> np.ndarray:
    if not np.isfinite(t).all():
        raise TensorError(f"non-finite values in {where}")
    return t


@dataclass
class ConvParams:
    """Kernel ``(out, in, kh, kw)`` and per-output-channel bias.

    Only stride 1 with zero "same" padding is supported, so kernels must have
    odd spatial extent.
    """

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.kernel.ndim != 4:
            raise TensorError(f"kernel must be 4-D, got shape {self.kernel.shape}")
        kh, kw = self.kernel.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise TensorError(f"same-mode convolution needs odd kernels, got {kh}x{kw}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise TensorError(
                f"bias length {self.bias.size} != out_channels {self.kernel.shape[0]}"
            )

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def padding(self) -> tuple[int, int]:
        kh, kw = self.kernel.shape[2:]
        return (kh - 1) // 2, (kw - 1) // 2

    stride = (1, 1)


def _pad(x: np.ndarray, ph: int, pw: int, value: float = 0.0) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=value)


def _correlate_same(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # x: (n, c, h, w); kernel: (o, c, kh, kw) -> (n, o, h, w), zero same-padding
    o, c, kh, kw = kernel.shape
    n, _, h, w = x.shape
    if kh == 1 and kw == 1:
        out = np.einsum("oc,nchw->nohw", kernel[:, :, 0, 0], x, optimize=True)
        return np.ascontiguousarray(out)
    xp = _pad(x, (kh - 1) // 2, (kw - 1) // 2)
    # im2col: (n, h, w, c, kh, kw) flattened to rows of length c*kh*kw
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
    cols = cols.reshape(n * h * w, c * kh * kw)
    out = cols @ kernel.reshape(o, c * kh * kw).T
    return np.ascontiguousarray(out.reshape(n, h, w, o).transpose(0, 3, 1, 2))


def conv2d_forward(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """Stride-1 zero same-padded 2-D cross-correlation plus bias."""
    x = as_tensor(x)
    if x.shape[1] != params.in_channels:
        raise TensorError(
            f"input has {x.shape[1]} channels, kernel expects {params.in_channels}"
        )
    out = _correlate_same(x, params.kernel)
    out += params.bias[None, :, None, None]
    return check_finite(out, "conv2d_forward output")


def conv2d_backward(
    x: np.ndarray, params: ConvParams, grad_out: np.ndarray, input_grad: bool = True
):
    """Adjoint of :func:`conv2d_forward`.

    Returns ``(grad_input, grad_kernel, grad_bias)``; ``grad_input`` is None
    when ``input_grad`` is false.
    """
    x = as_tensor(x)
    grad_out = as_tensor(grad_out)
    n, c, h, w = x.shape
    expected = (n, params.out_channels, h, w)
    if grad_out.shape != expected:
        raise TensorError(f"grad_out shape {grad_out.shape} != forward output {expected}")
    k = params.kernel
    o, _, kh, kw = k.shape

    grad_bias = grad_out.sum(axis=(0, 2, 3))
    if kh == 1 and kw == 1:
        grad_kernel = np.einsum("nohw,nchw->oc", grad_out, x, optimize=True)
        grad_kernel = grad_kernel.reshape(o, c, 1, 1)
    else:
        xp = _pad(x, (kh - 1) // 2, (kw - 1) // 2)
        cols = sliding_window_view(xp, (kh, kw), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
        cols = cols.reshape(n * h * w, c * kh * kw)
        g = grad_out.transpose(0, 2, 3, 1).reshape(n * h * w, o)
        grad_kernel = (g.T @ cols).reshape(o, c, kh, kw)
    if not input_grad:
        return None, np.ascontiguousarray(grad_kernel), grad_bias
    # correlation of grad_out with the spatially flipped, channel-transposed kernel
    flipped = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    grad_input = _correlate_same(grad_out, flipped)
    return grad_input, np.ascontiguousarray(grad_kernel), grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    if np.shape(x) != np.shape(grad_out):
        raise TensorError(f"shape mismatch {np.shape(x)} vs {np.shape(grad_out)}")
    return np.where(x > 0, grad_out, 0.0)


def _pool_geometry(size: int, window: int, stride: int, same_pad: bool):
    if same_pad:
        out = -(-size // stride)
        total = max((out - 1) * stride + window - size, 0)
        before = total // 2
        return out, before, total - before
    out = (size - window) // stride + 1
    return out, 0, 0


def _pool_windows(x, window, stride, same_pad):
    if window not in (2, 3) or stride not in (1, 2):
        raise TensorError(f"unsupported pool window={window} stride={stride}")
    n, c, h, w = x.shape
    oh, top, bottom = _pool_geometry(h, window, stride, same_pad)
    ow, left, right = _pool_geometry(w, window, stride, same_pad)
    if oh < 1 or ow < 1:
        raise TensorError(f"pooled size would be {oh}x{ow} for input {h}x{w}")
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)), constant_values=-np.inf)
    win = sliding_window_view(xp, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :oh, :ow].reshape(n, c, oh, ow, window * window)
    return win, (top, left), xp.shape


def maxpool2d(x: np.ndarray, window: int, stride: int, same_pad: bool) -> np.ndarray:
    """Max pooling; ``same_pad`` pads with -inf so output is ``ceil(size / stride)``."""
    x = as_tensor(x)
    win, _, _ = _pool_windows(x, window, stride, same_pad)
    return win.max(axis=-1)


def maxpool2d_backward(
    x: np.ndarray, grad_out: np.ndarray, window: int, stride: int, same_pad: bool
) -> np.ndarray:
    """Route each output gradient to the first (row-major) argmax of its window."""
    x = as_tensor(x)
    win, (top, left), padded_shape = _pool_windows(x, window, stride, same_pad)
    if grad_out.shape != win.shape[:4]:
        raise TensorError(f"grad_out shape {grad_out.shape} != pooled {win.shape[:4]}")
    arg = win.argmax(axis=-1)
    n, c, oh, ow = arg.shape
    rows = np.arange(oh)[:, None] * stride + arg // window
    cols = np.arange(ow)[None, :] * stride + arg % window
    gp = np.zeros(padded_shape)
    ni, ci = np.meshgrid(np.arange(n), np.arange(c), indexing="ij")
    np.add.at(gp, (ni[:, :, None, None], ci[:, :, None, None], rows, cols), grad_out)
    h, w = x.shape[2:]
    return np.ascontiguousarray(gp[:, :, top : top + h, left : left + w])


def channel_concat(inputs) -> np.ndarray:
    inputs = list(inputs)
    if not inputs:
        raise TensorError("channel_concat needs at least one input")
    ref = inputs[0].shape
    for t in inputs[1:]:
        if t.ndim != 4 or (t.shape[0], t.shape[2], t.shape[3]) != (ref[0], ref[2], ref[3]):
            raise TensorError(f"cannot concat shapes {ref} and {t.shape}")
    return np.concatenate(inputs, axis=1)


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    scale = n_in / n_out
    src = np.clip((np.arange(n_out) + 0.5) * scale - 0.5, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    m = np.zeros((n_out, n_in))
    np.add.at(m, (np.arange(n_out), i0), 1.0 - frac)
    np.add.at(m, (np.arange(n_out), i1), frac)
    return m


def bilinear_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with the pixel-center convention (no corner alignment)."""
    x = as_tensor(x)
    if out_h < 1 or out_w < 1:
        raise TensorError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = x.shape[2:]
    if (h, w) == (out_h, out_w):
        return x.copy()
    ry = _resize_matrix(h, out_h)
    rx = _resize_matrix(w, out_w)
    return np.ascontiguousarray(np.einsum("yh,nchw,xw->ncyx", ry, x, rx, optimize=True))
