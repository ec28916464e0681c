"""Independent brute-force references used by the tests."""

import numpy as np


def conv2d_loops(x, kernel, bias):
    """Five nested loops over (n, o, y, x, i) with explicit zero padding."""
    n, c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    out = np.zeros((n, o, h, w))
    for b in range(n):
        for oc in range(o):
            for yy in range(h):
                for xx in range(w):
                    acc = bias[oc]
                    for ic in range(c):
                        for dy in range(kh):
                            for dx in range(kw):
                                sy, sx = yy + dy - ph, xx + dx - pw
                                if 0 <= sy < h and 0 <= sx < w:
                                    acc += x[b, ic, sy, sx] * kernel[oc, ic, dy, dx]
                    out[b, oc, yy, xx] = acc
    return out


def sliding_max(x, window, stride, pad_before, pad_after):
    n, c, h, w = x.shape
    xp = np.full((n, c, h + pad_before + pad_after, w + pad_before + pad_after), -np.inf)
    xp[:, :, pad_before : pad_before + h, pad_before : pad_before + w] = x
    oh = (xp.shape[2] - window) // stride + 1
    ow = (xp.shape[3] - window) // stride + 1
    out = np.empty((n, c, oh, ow))
    for i in range(oh):
        for j in range(ow):
            out[:, :, i, j] = xp[:, :, i * stride : i * stride + window, j * stride : j * stride + window].max(axis=(2, 3))
    return out


def bilinear_pixel(img, out_h, out_w, y, x):
    """Direct per-pixel evaluation of pixel-centre bilinear sampling."""
    h, w = img.shape
    sy = min(max((y + 0.5) * h / out_h - 0.5, 0.0), h - 1)
    sx = min(max((x + 0.5) * w / out_w - 0.5, 0.0), w - 1)
    y0, x0 = int(np.floor(sy)), int(np.floor(sx))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = sy - y0, sx - x0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def central_difference(f, arr, h=1e-5):
    """Numerical gradient of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    grad = np.zeros_like(arr)
    for i in range(arr.size):
        orig = arr.flat[i]
        arr.flat[i] = orig + h
        fp = f()
        arr.flat[i] = orig - h
        fm = f()
        arr.flat[i] = orig
        grad.flat[i] = (fp - fm) / (2 * h)
    return grad


def max_rel_error(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)))


def auc_by_pairs(scores, truth):
    """Double loop over positive/negative pairs, ties counted one half."""
    pos = [s for s, t in zip(scores, truth) if t]
    neg = [s for s, t in zip(scores, truth) if not t]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))
