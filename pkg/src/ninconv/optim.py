"""Adam with L2 weight decay and the training loop."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import graph
from .graph import NetworkSpec, ParameterStore
from .losses import loss_and_grad

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.0002
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    max_steps: int = 1000
    seed: int = 0
    loss_kind: str = "euclidean"
    loss_normalization: str = "per_pixel"
    decay_biases: bool = False

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        for beta in (self.adam_beta1, self.adam_beta2):
            if not 0 <= beta < 1:
                raise ValueError(f"Adam betas must lie in [0, 1), got {beta}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class AdamState:
    """First/second moments per parameter array, keyed ``(layer, "weight"|"bias")``."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


@dataclass
class StepReport:
    step: int
    stale_gradients: bool


def adam_step(params: ParameterStore, state: AdamState, cfg: TrainConfig) -> StepReport:
    """One Adam update in place. Weight decay is added to the gradient (L2)."""
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    stale = True
    for name, p in params.items():
        for slot, theta, grad in (("weight", p.weight, p.grad_weight), ("bias", p.bias, p.grad_bias)):
            if np.any(grad != 0):
                stale = False
            g = grad
            if cfg.weight_decay and (slot == "weight" or cfg.decay_biases):
                g = grad + cfg.weight_decay * theta
            key = (name, slot)
            m = state.m.get(key)
            if m is None:
                m = state.m[key] = np.zeros_like(theta)
                state.v[key] = np.zeros_like(theta)
            v = state.v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            theta -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
    if stale:
        log.warning("adam step %d applied with all-zero gradients", state.t)
    return StepReport(state.t, stale)


def iterate_batches(inputs: np.ndarray, targets: np.ndarray, batch_size: int, seed: int) -> Iterator:
    """Endless stream of ``(x, y)`` batches, reshuffled each epoch with a seeded RNG.

    The last partial batch of an epoch is kept.
    """
    rng = np.random.default_rng(seed)
    n = len(inputs)
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            yield inputs[idx], targets[idx]


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss", "elapsed_ms"])
            for row in zip(self.steps, self.losses, self.elapsed_ms):
                w.writerow([row[0], f"{row[1]:.9g}", f"{row[2]:.1f}"])


def train(
    net: NetworkSpec,
    params: ParameterStore,
    batches: Iterable,
    cfg: TrainConfig,
    state: AdamState | None = None,
    callback=None,
) -> TrainLog:
    """zero_grads -> forward -> loss -> backward -> adam_step, ``cfg.max_steps`` times.

    ``callback(step, loss)`` runs after each step; returning True stops early.
    """
    state = state if state is not None else AdamState()
    out = TrainLog()
    start = time.perf_counter()
    it = iter(batches)
    for step in range(1, cfg.max_steps + 1):
        x, y = next(it)
        params.zero_grads()
        pred, tape = graph.forward(net, params, x, record=True)
        loss, grad = loss_and_grad(cfg.loss_kind, pred, y, cfg.loss_normalization)
        if not np.isfinite(loss):
            raise TrainingError(step, loss)
        graph.backward(net, params, tape, grad, need_input_grad=False)
        adam_step(params, state, cfg)
        out.steps.append(step)
        out.losses.append(loss)
        out.elapsed_ms.append((time.perf_counter() - start) * 1e3)
        if callback is not None and callback(step, loss):
            break
    return out
