"""Static feed-forward layer graphs with hand-written backward passes.

A network is an ordered list of layer specs. A :class:`BranchGroup` runs
several sub-sequences on the same input and concatenates their outputs along
channels, which is all an inception module needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import tensor as T
from .tensor import ConvParams, TensorError


@dataclass(frozen=True)
class Conv:
    name: str
    in_channels: int
    out_channels: int
    kernel_size: int
    kind = "conv"


@dataclass(frozen=True)
class ReLU:
    name: str
    kind = "relu"


@dataclass(frozen=True)
class MaxPool:
    name: str
    window: int = 3
    stride: int = 1
    same_pad: bool = True
    kind = "maxpool"


@dataclass(frozen=True)
class BranchGroup:
    name: str
    branches: tuple
    kind = "concat-branch-group"


Layer = Union[Conv, ReLU, MaxPool, BranchGroup]


def _walk(layers):
    for layer in layers:
        yield layer
        if isinstance(layer, BranchGroup):
            for branch in layer.branches:
                yield from _walk(branch)


def _channels_through(layers, c: int) -> int:
    for layer in layers:
        if isinstance(layer, Conv):
            if layer.in_channels != c:
                raise ValueError(
                    f"{layer.name}: expects {layer.in_channels} input channels, gets {c}"
                )
            c = layer.out_channels
        elif isinstance(layer, BranchGroup):
            if not layer.branches:
                raise ValueError(f"{layer.name}: empty branch group")
            c = sum(_channels_through(b, c) for b in layer.branches)
    return c


def _conv_depth(layers) -> int:
    depth = 0
    for layer in layers:
        if isinstance(layer, Conv):
            depth += 1
        elif isinstance(layer, BranchGroup):
            depth += max(_conv_depth(b) for b in layer.branches)
    return depth


@dataclass
class NetworkSpec:
    """Ordered layer list with its entry channel count."""

    layers: list
    in_channels: int

    def __post_init__(self):
        names = [layer.name for layer in _walk(self.layers)]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate layer names: {sorted(dupes)}")
        self.out_channels = _channels_through(self.layers, self.in_channels)

    def convs(self) -> list[Conv]:
        return [layer for layer in _walk(self.layers) if isinstance(layer, Conv)]

    def conv_depth(self) -> int:
        """Number of conv layers on the longest input-to-output path."""
        return _conv_depth(self.layers)


@dataclass
class Parameter:
    weight: np.ndarray
    bias: np.ndarray
    grad_weight: np.ndarray = field(init=False)
    grad_bias: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)

    @property
    def conv(self) -> ConvParams:
        return ConvParams(self.weight, self.bias)


class ParameterStore(dict):
    """Maps conv layer name to its :class:`Parameter`."""

    def zero_grads(self):
        for p in self.values():
            p.grad_weight[...] = 0.0
            p.grad_bias[...] = 0.0

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            {k: Parameter(p.weight.copy(), p.bias.copy()) for k, p in self.items()}
        )


def init_parameters(net: NetworkSpec, seed: int = 0, scheme: str = "uniform") -> ParameterStore:
    """Fan-in scaled uniform init (bound sqrt(6 / fan_in)), zero biases.

    ``scheme="zeros"`` zeroes every kernel as well.
    """
    if scheme not in ("uniform", "zeros"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    for conv in net.convs():
        shape = (conv.out_channels, conv.in_channels, conv.kernel_size, conv.kernel_size)
        if scheme == "zeros":
            w = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (conv.in_channels * conv.kernel_size**2))
            w = rng.uniform(-bound, bound, size=shape)
        store[conv.name] = Parameter(w, np.zeros(conv.out_channels))
    return store


# ---------------------------------------------------------------- execution


def _forward_seq(layers, params, x, record):
    tape = []
    for layer in layers:
        if isinstance(layer, Conv):
            _check_finite(x, layer)
            y = T.conv2d_forward(x, params[layer.name].conv)
            tape.append(x if record else None)
        elif isinstance(layer, ReLU):
            y = T.relu_forward(x)
            tape.append(x if record else None)
        elif isinstance(layer, MaxPool):
            y = T.maxpool2d(x, layer.window, layer.stride, layer.same_pad)
            tape.append(x if record else None)
        elif isinstance(layer, BranchGroup):
            outs, subtapes = [], []
            for branch in layer.branches:
                o, t = _forward_seq(branch, params, x, record)
                outs.append(o)
                subtapes.append(t)
            y = T.channel_concat(outs)
            tape.append(([o.shape[1] for o in outs], subtapes) if record else None)
        else:
            raise TypeError(f"unknown layer {layer!r}")
        x = y
    return x, tape


def _check_finite(x, layer):
    if not np.isfinite(x).all():
        raise TensorError(f"non-finite activation entering layer {layer.name!r}")


def forward(net: NetworkSpec, params: ParameterStore, x, record: bool = False):
    """Run ``net`` on ``x``; returns ``(output, tape)``.

    The tape is ``None`` unless ``record`` is set, and is required by
    :func:`backward`.
    """
    x = T.as_tensor(x)
    if x.shape[1] != net.in_channels:
        raise TensorError(f"input has {x.shape[1]} channels, network expects {net.in_channels}")
    out, tape = _forward_seq(net.layers, params, x, record)
    if not np.isfinite(out).all():
        raise TensorError(f"non-finite activation at output of layer {net.layers[-1].name!r}")
    return out, (tape if record else None)


def _backward_seq(layers, params, tape, g, need_input_grad):
    for i in range(len(layers) - 1, -1, -1):
        layer, rec = layers[i], tape[i]
        need = need_input_grad or i > 0
        if isinstance(layer, Conv):
            p = params[layer.name]
            gi, gw, gb = T.conv2d_backward(rec, p.conv, g, input_grad=need)
            p.grad_weight += gw
            p.grad_bias += gb
            g = gi
        elif isinstance(layer, ReLU):
            g = T.relu_backward(rec, g)
        elif isinstance(layer, MaxPool):
            g = T.maxpool2d_backward(rec, g, layer.window, layer.stride, layer.same_pad)
        elif isinstance(layer, BranchGroup):
            widths, subtapes = rec
            if g.shape[1] != sum(widths):
                raise TensorError(f"{layer.name}: gradient has {g.shape[1]} channels")
            total = None
            start = 0
            for branch, width, sub in zip(layer.branches, widths, subtapes):
                gb_ = _backward_seq(branch, params, sub, g[:, start : start + width], need)
                start += width
                if need:
                    total = gb_ if total is None else total + gb_
            g = total
    return g


def backward(net: NetworkSpec, params: ParameterStore, tape, grad_output, need_input_grad: bool = True):
    """Accumulate parameter gradients into ``params`` and return d(loss)/d(input).

    With ``need_input_grad=False`` the input gradient of the first layer is
    skipped and ``None`` is returned.
    """
    if tape is None:
        raise ValueError("backward needs a tape from forward(..., record=True)")
    grad_output = T.as_tensor(grad_output)
    return _backward_seq(net.layers, params, tape, grad_output, need_input_grad)


# ----------------------------------------------------------- introspection


@dataclass
class ParameterCount:
    per_layer: dict
    total: int
    kernel_only: int


def count_parameters(net: NetworkSpec, params: ParameterStore | None = None) -> ParameterCount:
    """Kernel and bias counts per conv layer. ``params`` is optional and only
    cross-checked against ``net`` when given."""
    per_layer = {}
    for conv in net.convs():
        k = conv.out_channels * conv.in_channels * conv.kernel_size**2
        b = conv.out_channels
        if params is not None and params[conv.name].weight.size != k:
            raise ValueError(f"{conv.name}: stored kernel does not match the layer shape")
        per_layer[conv.name] = {"kernel": k, "bias": b}
    kernel_only = sum(v["kernel"] for v in per_layer.values())
    total = kernel_only + sum(v["bias"] for v in per_layer.values())
    return ParameterCount(per_layer, total, kernel_only)


# --------------------------------------------------------- gradient check


@dataclass
class GradientCheckReport:
    param_errors: dict
    input_error: float
    threshold: float
    n_checked: int

    @property
    def max_error(self) -> float:
        return max([self.input_error, *self.param_errors.values()])

    @property
    def passed(self) -> bool:
        return self.max_error < self.threshold

    def lines(self):
        for name, err in self.param_errors.items():
            yield f"{name:40s} {err:.3e}"
        yield f"{'<input>':40s} {self.input_error:.3e}"
        yield f"max relative error {self.max_error:.3e} ({self.n_checked} coords) -> " + (
            "PASS" if self.passed else "FAIL"
        )


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return np.abs(analytic - numeric) / denom


def gradient_check(
    net: NetworkSpec,
    params: ParameterStore,
    x,
    loss_kind: str = "euclidean",
    target=None,
    *,
    h: float = 1e-5,
    threshold: float = 1e-4,
    max_exhaustive: int = 50_000,
    n_sample: int = 500,
    seed: int = 0,
    backward_fn: Callable = backward,
) -> GradientCheckReport:
    """Compare analytic gradients against central differences.

    Every parameter coordinate is checked when the net has at most
    ``max_exhaustive`` parameters, otherwise a seeded random subsample of
    ``n_sample`` coordinates. ``backward_fn`` can be swapped to test the
    harness itself.
    """
    from .losses import loss_and_grad

    x = T.as_tensor(x).copy()
    rng = np.random.default_rng(seed)
    out, _ = forward(net, params, x)
    if target is None:
        if loss_kind == "softmax":
            target = rng.integers(0, out.shape[1], size=(out.shape[0],) + out.shape[2:])
        else:
            target = rng.standard_normal(out.shape)

    def loss_at() -> float:
        o, _ = forward(net, params, x)
        val, _ = loss_and_grad(loss_kind, o, target, "per_image")
        if not np.isfinite(val):
            raise TensorError("non-finite loss during gradient check")
        return val

    params.zero_grads()
    out, tape = forward(net, params, x, record=True)
    _, g = loss_and_grad(loss_kind, out, target, "per_image")
    grad_x = backward_fn(net, params, tape, g)

    coords = []  # (label, array, flat index, analytic value)
    for name, p in params.items():
        for arr, grad in ((p.weight, p.grad_weight), (p.bias, p.grad_bias)):
            for idx in range(arr.size):
                coords.append((name, arr, idx, grad.flat[idx]))
    n_params = len(coords)
    for idx in range(x.size):
        coords.append(("<input>", x, idx, grad_x.flat[idx]))
    if n_params > max_exhaustive:
        pick = np.sort(rng.choice(len(coords), size=n_sample, replace=False))
        coords = [coords[i] for i in pick]

    param_errors = {name: 0.0 for name in params}
    input_error = 0.0
    for label, arr, idx, analytic in coords:
        orig = arr.flat[idx]
        arr.flat[idx] = orig + h
        lp = loss_at()
        arr.flat[idx] = orig - h
        lm = loss_at()
        arr.flat[idx] = orig
        err = float(relative_error(analytic, (lp - lm) / (2 * h)))
        if label == "<input>":
            input_error = max(input_error, err)
        else:
            param_errors[label] = max(param_errors[label], err)
    return GradientCheckReport(param_errors, input_error, threshold, len(coords))


def sign_flipped_backward(net, params, tape, grad_output, need_input_grad=True):
    """Deliberately wrong backward (all gradients negated), for harness tests."""
    return backward(net, params, tape, -T.as_tensor(grad_output), need_input_grad)
