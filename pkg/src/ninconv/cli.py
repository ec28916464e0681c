"""``ninconv`` command line: train, infer, eval, analyze, degrade, gradcheck.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import graph, plotting
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .data import NetpbmError, dct_degrade, load_netpbm, read_manifest, save_netpbm, write_manifest
from .inception import ArchitectureSpec, build_network, fig4_scenarios, format_architecture_table, network_spec, receptive_field
from .metrics import MetricReport, binary_metrics, psnr, segmentation_metrics, ssim, sweep_curves
from .optim import TrainingError, iterate_batches, train
from .tasks import TaskMismatch, load_pairs, predict, render, training_arrays
from .tensor import TensorError

log = logging.getLogger("ninconv")


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


class _Artifacts:
    """Records every file written under a run directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name) -> Path:
        self.files.append(name)
        return self.root / name

    def close(self):
        with open(self.root / "artifacts.txt", "w") as fh:
            fh.writelines(f"{name}\n" for name in self.files)


# ------------------------------------------------------------------ commands


def cmd_train(args) -> int:
    cfg = _config(args)
    if not cfg.train_manifest:
        raise UsageError("config is missing required key 'train_manifest'")
    out = _Artifacts(args.output or cfg.output_dir)
    pairs = load_pairs(read_manifest(cfg.train_manifest))
    X, Y, mean = training_arrays(cfg.task, pairs, cfg.patch_stride)
    arch = cfg.architecture()
    net, params = build_network(arch, seed=cfg.seed, init=cfg.init)
    tcfg = cfg.train_config()
    log.info("training %s net (%d conv layers) on %d samples", cfg.task, net.conv_depth(), len(X))

    def on_step(step, loss):
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step < tcfg.max_steps:
            save_checkpoint(out.path(f"checkpoint_step{step}.ninc"), Checkpoint(arch, mean, params))
        if step % 50 == 0:
            log.info("step %d loss %.6g", step, loss)

    history = train(net, params, iterate_batches(X, Y, tcfg.batch_size, tcfg.seed), tcfg, callback=on_step)
    save_checkpoint(out.path("checkpoint.ninc"), Checkpoint(arch, mean, params))
    history.write_csv(out.path("train_log.csv"))
    plotting.plot_training_loss(history, out.path("train_loss.png"))
    out.close()
    print(f"final loss {history.losses[-1]:.6g} after {history.steps[-1]} steps -> {out.root / 'checkpoint.ninc'}")
    return 0


def cmd_infer(args) -> int:
    if not (args.checkpoint and args.input and args.output):
        raise UsageError("infer needs --checkpoint, --input and --output")
    ckpt = load_checkpoint(args.checkpoint)
    image = load_netpbm(args.input)
    result = render(ckpt, predict(ckpt, image))
    save_netpbm(result, args.output)
    print(f"{ckpt.arch.task} output {result.width}x{result.height} -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    if not args.checkpoint:
        raise UsageError("eval needs --checkpoint")
    manifest_path = args.input or cfg.eval_manifest
    if not manifest_path:
        raise UsageError("eval needs --input MANIFEST or 'eval_manifest' in the config")
    manifest = read_manifest(manifest_path)
    if not len(manifest):
        raise UsageError(f"manifest {manifest_path} is empty")
    ckpt = load_checkpoint(args.checkpoint)
    net = network_spec(ckpt.arch)
    out = _Artifacts(args.output or os.path.join(cfg.output_dir, "eval"))
    report = MetricReport(ckpt.arch.task)
    pairs = load_pairs(manifest)

    if ckpt.arch.task == "skin":
        probs, truths = [], []
        for img, lab in pairs:
            probs.append(predict(ckpt, img, net).ravel())
            truths.append((lab.gray() > 0).ravel())
        sweep = sweep_curves(probs, truths)
        prob, truth = np.concatenate(probs), np.concatenate(truths)
        scores = binary_metrics(prob, truth, sweep.peak_threshold)
        for name in ("accuracy", "precision", "recall", "f_measure"):
            report.add("peak_f_threshold", name, getattr(scores, name))
        report.add("peak_f_threshold", "threshold", sweep.peak_threshold)
        report.add("curve", "auc_roc", sweep.auc_roc)
        sweep.pr.write_csv(out.path("pr.csv"))
        sweep.roc.write_csv(out.path("roc.csv"))
        plotting.plot_curve(sweep.pr, out.path("pr.png"))
        plotting.plot_curve(sweep.roc, out.path("roc.png"), label=f"AUC {sweep.auc_roc:.4f}")
    elif ckpt.arch.task == "segmentation":
        preds = [render(ckpt, predict(ckpt, img, net)).gray().ravel() for img, _ in pairs]
        truth = [lab.gray().ravel() for _, lab in pairs]
        seg = segmentation_metrics(np.concatenate(preds), np.concatenate(truth), ckpt.arch.output_channels)
        report.add("segmentation", "accuracy", seg.accuracy)
        report.add("segmentation", "class_mean", seg.class_mean)
        report.add("segmentation", "mean_iou", seg.mean_iou)
    else:
        rows = []
        for degraded, clean in pairs:
            restored = render(ckpt, predict(ckpt, degraded, net)).gray()
            c, d = clean.gray(), degraded.gray()
            rows.append((psnr(c, d), psnr(c, restored), ssim(c, d), ssim(c, restored)))
        mean = np.mean(np.array(rows), axis=0)
        report.add("degraded", "psnr", mean[0])
        report.add("restored", "psnr", mean[1])
        report.add("degraded", "ssim", mean[2])
        report.add("restored", "ssim", mean[3])
        c = pairs[0][1].gray()
        d = pairs[0][0].gray()
        plotting.plot_restoration_triplet(c, d, render(ckpt, predict(ckpt, pairs[0][0], net)).gray(), out.path("example.png"))
    report.write_csv(out.path("report.csv"))
    out.close()
    for (group, name), value in report.scalars.items():
        print(f"{group:18s} {name:12s} {value:.6f}")
    return 0


def cmd_analyze(args) -> int:
    cfg = _config(args)
    arch = cfg.architecture()
    print(format_architecture_table(arch))
    print()
    print("receptive field of two-layer stacks:")
    for label, net in fig4_scenarios().items():
        print(f"  {label:22s} {receptive_field(net).rf}x{receptive_field(net).rf}")
    if args.output:
        out = _Artifacts(args.output)
        rf = receptive_field(network_spec(arch))
        with open(out.path("architecture.txt"), "w") as fh:
            fh.write(format_architecture_table(arch) + "\n")
        with open(out.path("receptive_field.csv"), "w") as fh:
            fh.write("layer,rf,jump\n")
            fh.writelines(f"{name},{r},{j}\n" for name, r, j in rf.layers)
        plotting.plot_receptive_field(rf, out.path("receptive_field.png"), input_size=50)
        out.close()
    return 0


def cmd_degrade(args) -> int:
    if not (args.input and args.output and args.quality is not None):
        raise UsageError("degrade needs --input DIR, --quality Q and --output DIR")
    src = Path(args.input)
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in (".pgm", ".pnm")) if src.is_dir() else []
    if not files:
        raise UsageError(f"no .pgm images found in {src}")
    dst = Path(args.output)
    dst.mkdir(parents=True, exist_ok=True)
    entries, failures, scores = [], [], []
    for path in files:
        try:
            clean = load_netpbm(path)
            degraded = dct_degrade(clean, args.quality)
            target = dst / path.name
            save_netpbm(degraded, target)
        except (OSError, ValueError) as exc:
            failures.append(f"{path.name}: {exc}")
            continue
        entries.append((str(target), str(path.resolve())))
        scores.append(psnr(clean.gray(), degraded.gray()))
    write_manifest(entries, dst / "manifest.tsv")
    finite = [s for s in scores if np.isfinite(s)]
    summary = f"degraded {len(entries)}/{len(files)} images at Q={args.quality}"
    if finite:
        summary += f", mean PSNR {np.mean(finite):.2f} dB"
    print(summary)
    for line in failures:
        print(f"  failed: {line}", file=sys.stderr)
    return 1 if failures else 0


def gradcheck_nets(cfg: RunConfig):
    """Shrunken (1 module, 8 wide) nets for both losses, with the config's input channels."""
    in_ch = cfg.architecture().input_channels
    euclid = ArchitectureSpec(task="restoration" if in_ch == 1 else "skin", n_inception=1, width=8, variant=cfg.variant)
    softmax = ArchitectureSpec(task="segmentation", n_inception=1, width=8, variant=cfg.variant, input_channels=in_ch, n_classes=cfg.n_classes)
    return {"euclidean": euclid, "softmax": softmax}


def run_gradcheck(cfg: RunConfig, corrupt: bool = False, size: int = 8):
    reports = {}
    for loss_kind, arch in gradcheck_nets(cfg).items():
        net, params = build_network(arch, seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed + 1)
        # nonzero biases keep pre-activations off the ReLU kink
        for p in params.values():
            p.bias[:] = rng.uniform(-0.1, 0.1, p.bias.shape)
        x = rng.standard_normal((1, arch.input_channels, size, size))
        backward_fn = graph.sign_flipped_backward if corrupt else graph.backward
        reports[loss_kind] = graph.gradient_check(net, params, x, loss_kind, seed=cfg.seed, backward_fn=backward_fn)
    return reports


def cmd_gradcheck(args) -> int:
    cfg = _config(args)
    ok = True
    for loss_kind, report in run_gradcheck(cfg, corrupt=args.corrupt_backward).items():
        print(f"== {loss_kind} ==")
        for line in report.lines():
            print(line)
        ok &= report.passed
    return 0 if ok else 1


COMMANDS = {
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "degrade": cmd_degrade,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ninconv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--checkpoint")
        p.add_argument("--input")
        p.add_argument("--output")
        p.add_argument("--quality", type=int)
        p.add_argument("--seed", type=int)
        if name == "gradcheck":
            p.add_argument("--corrupt-backward", action="store_true", help="negate all gradients (harness self-test)")
    return parser


@contextlib.contextmanager
def _thread_cap():
    limit = os.environ.get("NINCONV_THREADS")
    if not limit:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=int(limit)):
        yield


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with _thread_cap():
            return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, TensorError, TaskMismatch, CheckpointError, NetpbmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
