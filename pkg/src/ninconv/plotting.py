"""Figures written next to the CSV outputs."""

from __future__ import annotations

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _new_figure(width=4.5, height=4.0):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)


def plot_curve(curve, path, label=None):
    """PR (recall vs precision) or ROC (FPR vs TPR) curve."""
    fig, ax = _new_figure()
    ax.plot(curve.x, curve.y, lw=1.5, label=label)
    if curve.kind == "roc":
        ax.plot([0, 1], [0, 1], ls=":", color="0.6", lw=1)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title("ROC")
    else:
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_title("Precision-recall")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    if label:
        ax.legend(loc="lower right")
    _save(fig, path)


def plot_training_loss(train_log, path):
    fig, ax = _new_figure(5.5, 3.5)
    ax.plot(train_log.steps, train_log.losses, lw=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    if train_log.losses and min(train_log.losses) > 0:
        ax.set_yscale("log")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_receptive_field(result, path, input_size=None):
    names = [name for name, _, _ in result.layers]
    rf = [r for _, r, _ in result.layers]
    fig, ax = _new_figure(6.0, 3.5)
    ax.step(range(1, len(rf) + 1), rf, where="post")
    if input_size:
        ax.axhline(input_size, ls="--", color="0.5", lw=1, label=f"input {input_size}px")
        ax.legend(loc="upper left")
    ax.set_xticks(range(1, len(rf) + 1))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("receptive field (px)")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_restoration_triplet(clean, degraded, restored, path):
    """Side-by-side clean / degraded / restored grayscale arrays."""
    fig = Figure(figsize=(7.5, 2.8), dpi=100)
    FigureCanvasAgg(fig)
    for i, (img, title) in enumerate(((clean, "clean"), (degraded, "degraded"), (restored, "restored"))):
        ax = fig.add_subplot(1, 3, i + 1)
        ax.imshow(img, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    _save(fig, path)
