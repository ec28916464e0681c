"""Pooling-free multi-kernel inception modules and the full image-to-image net.

The default module has four parallel branches (1x1, 3x3, 5x5, 7x7), the
larger kernels behind 1x1 reduction layers, with outputs concatenated to 64
channels. Ablation variants drop the 7x7 branch (optionally adding a max-pool
projection branch) or share the 7x7 budget with a 9x9 branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .graph import BranchGroup, Conv, MaxPool, NetworkSpec, ReLU, count_parameters, init_parameters

VARIANT_TAGS = ("googlenet_inception", "no_pool_projection", "with_7x7", "with_7x7_9x9")

# kernel size -> (reduce width, output width) at 64 channels; 1x1 has no reduction
# Without the 7x7 branch its 8 output channels move to the 1x1 branch, so
# every pool-free module stays at 64 and the pool projection makes 72.
_BASE_BRANCHES = {
    "googlenet_inception": {1: (0, 16), 3: (32, 32), 5: (16, 16)},
    "no_pool_projection": {1: (0, 16), 3: (32, 32), 5: (16, 16)},
    "with_7x7": {1: (0, 8), 3: (32, 32), 5: (16, 16), 7: (8, 8)},
    # 7x7 budget split with the 9x9 branch
    "with_7x7_9x9": {1: (0, 8), 3: (32, 32), 5: (16, 16), 7: (4, 4), 9: (4, 4)},
}
_BASE_POOL_PROJECTION = {"googlenet_inception": 8}

TASK_LOSS = {"skin": "euclidean", "restoration": "euclidean", "segmentation": "softmax"}


@dataclass(frozen=True)
class InceptionVariant:
    tag: str
    branches: dict
    pool_projection: int = 0

    @property
    def out_channels(self) -> int:
        return sum(out for _, out in self.branches.values()) + self.pool_projection


def make_variant(tag: str, width: int = 64) -> InceptionVariant:
    """Variant ``tag`` with branch widths scaled by ``width / 64`` (each at least 1)."""
    if tag not in _BASE_BRANCHES:
        raise ValueError(f"unknown inception variant {tag!r}; choose from {VARIANT_TAGS}")
    if width < 1:
        raise ValueError("width must be >= 1")

    def scale(c: int) -> int:
        return 0 if c == 0 else max(1, round(c * width / 64))

    branches = {k: (scale(r), scale(o)) for k, (r, o) in _BASE_BRANCHES[tag].items()}
    return InceptionVariant(tag, branches, scale(_BASE_POOL_PROJECTION.get(tag, 0)))


def build_inception_module(variant: InceptionVariant, in_channels: int, name: str = "inception") -> BranchGroup:
    """One branch group: direct 1x1, reduced kxk branches, optional pool projection.

    Every conv inside is followed by a ReLU.
    """
    if in_channels < 1:
        raise ValueError("in_channels must be >= 1")
    if variant.tag not in VARIANT_TAGS:
        raise ValueError(f"unknown inception variant {variant.tag!r}")
    branches = []
    for k, (reduce, out) in sorted(variant.branches.items()):
        if out < 1 or (k > 1 and reduce < 1):
            raise ValueError(f"{name}: zero filter count in {k}x{k} branch")
        prefix = f"{name}/{k}x{k}"
        if k == 1:
            branches.append((Conv(prefix, in_channels, out, 1), ReLU(prefix + "_relu")))
        else:
            branches.append(
                (
                    Conv(prefix + "_reduce", in_channels, reduce, 1),
                    ReLU(prefix + "_reduce_relu"),
                    Conv(prefix, reduce, out, k),
                    ReLU(prefix + "_relu"),
                )
            )
    if variant.pool_projection:
        prefix = f"{name}/pool_proj"
        branches.append(
            (
                MaxPool(f"{name}/pool", window=3, stride=1, same_pad=True),
                Conv(prefix, in_channels, variant.pool_projection, 1),
                ReLU(prefix + "_relu"),
            )
        )
    return BranchGroup(name, tuple(branches))


@dataclass(frozen=True)
class ArchitectureSpec:
    task: str = "skin"
    n_inception: int = 8
    variant: str = "with_7x7"
    width: int = 64
    input_channels: int | None = None
    output_channels: int | None = None
    n_classes: int = 2

    def __post_init__(self):
        if self.task not in ("skin", "segmentation", "restoration"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.variant not in VARIANT_TAGS:
            raise ValueError(f"unknown inception variant {self.variant!r}")
        if self.n_inception < 0 or self.width < 1:
            raise ValueError("n_inception must be >= 0 and width >= 1")
        if self.input_channels is None:
            object.__setattr__(self, "input_channels", 3 if self.task != "restoration" else 1)
        if self.output_channels is None:
            out = self.n_classes if self.task == "segmentation" else 1
            object.__setattr__(self, "output_channels", out)
        if self.task != "segmentation" and self.output_channels != 1:
            raise ValueError(f"{self.task} networks produce a single output channel")

    @property
    def depth_layers(self) -> int:
        return 4 + 2 * self.n_inception

    @property
    def loss_kind(self) -> str:
        return TASK_LOSS[self.task]

    @classmethod
    def from_depth(cls, depth: int, **kw) -> "ArchitectureSpec":
        if depth < 4 or depth % 2:
            raise ValueError(f"depth must be 4 + 2*n_inception, got {depth}")
        return cls(n_inception=(depth - 4) // 2, **kw)

    def with_(self, **kw) -> "ArchitectureSpec":
        return replace(self, **kw)


def network_spec(arch: ArchitectureSpec) -> NetworkSpec:
    """Stem (7x7, 1x1, 3x3), ``n_inception`` modules, and a linear 5x5 head."""
    w = arch.width
    layers = [
        Conv("conv1", arch.input_channels, w, 7),
        ReLU("conv1_relu"),
        Conv("conv2_reduce", w, w, 1),
        ReLU("conv2_reduce_relu"),
        Conv("conv2", w, w, 3),
        ReLU("conv2_relu"),
    ]
    variant = make_variant(arch.variant, w)
    c = w
    for i in range(1, arch.n_inception + 1):
        layers.append(build_inception_module(variant, c, f"inception{i}"))
        c = variant.out_channels
    layers.append(Conv("conv3", c, arch.output_channels, 5))
    return NetworkSpec(layers, arch.input_channels)


def build_network(arch: ArchitectureSpec, seed: int = 0, init: str = "uniform"):
    """Returns ``(NetworkSpec, ParameterStore)``; see :func:`graph.init_parameters`."""
    net = network_spec(arch)
    return net, init_parameters(net, seed=seed, scheme=init)


# --------------------------------------------------------- receptive field


@dataclass
class ReceptiveFieldResult:
    layers: list = field(default_factory=list)  # (name, rf, jump)

    @property
    def rf(self) -> int:
        return self.layers[-1][1] if self.layers else 1


def _rf_seq(layers, rf, jump, out):
    for layer in layers:
        if isinstance(layer, Conv):
            rf += (layer.kernel_size - 1) * jump
        elif isinstance(layer, MaxPool):
            rf += (layer.window - 1) * jump
            jump *= layer.stride
        elif isinstance(layer, BranchGroup):
            ends = [_rf_seq(b, rf, jump, None) for b in layer.branches]
            rf = max(e[0] for e in ends)
            jump = max(e[1] for e in ends)
        else:
            continue
        if out is not None:
            out.append((layer.name, rf, jump))
    return rf, jump


def receptive_field(net: NetworkSpec) -> ReceptiveFieldResult:
    """Per-layer receptive field and jump; a branch group takes its widest branch."""
    result = ReceptiveFieldResult()
    _rf_seq(net.layers, 1, 1, result.layers)
    return result


def fig4_scenarios() -> dict:
    """The three two-layer comparisons: stacked 3x3, 3x3 with 2x2/2 pooling, stacked 7x7."""
    return {
        "3x3, 3x3": NetworkSpec([Conv("a", 1, 1, 3), Conv("b", 1, 1, 3)], 1),
        "3x3+pool, 3x3+pool": NetworkSpec(
            [
                Conv("a", 1, 1, 3),
                MaxPool("a_pool", 2, 2, same_pad=False),
                Conv("b", 1, 1, 3),
                MaxPool("b_pool", 2, 2, same_pad=False),
            ],
            1,
        ),
        "7x7, 7x7": NetworkSpec([Conv("a", 1, 1, 7), Conv("b", 1, 1, 7)], 1),
    }


# ----------------------------------------------------------- table output

# Params column as printed for the 64-wide skin net
PRINTED_PARAMS = {"Convolution 1": "9K", "Convolution 2": "41K", "Inception": "23K", "Convolution 3": "16K"}
PRINTED_TOTAL = "300K"


def _fmt_k(n: int) -> str:
    return f"{n / 1000:.0f}K" if n >= 1000 else str(n)


def architecture_rows(arch: ArchitectureSpec) -> list[dict]:
    """One dict per Table-1-style block: type, kernel, output, depth, widths, params."""
    net = network_spec(arch)
    params = {c.name: c.out_channels * c.in_channels * c.kernel_size**2 for c in net.convs()}
    rows = []

    def block_params(prefix):
        return sum(v for k, v in params.items() if k == prefix or k.startswith(prefix + "_") or k.startswith(prefix + "/"))

    w = arch.width
    rows.append(dict(type="Convolution 1", kernel="7x7", out=f"H x W x {w}", depth=1, widths={}, params=params["conv1"]))
    rows.append(
        dict(
            type="Convolution 2",
            kernel="3x3",
            out=f"H x W x {w}",
            depth=2,
            widths={"3x3 reduce": w, "3x3": w},
            params=params["conv2_reduce"] + params["conv2"],
        )
    )
    variant = make_variant(arch.variant, w)
    for i in range(1, arch.n_inception + 1):
        widths = {}
        for k, (r, o) in sorted(variant.branches.items()):
            if k > 1:
                widths[f"{k}x{k} reduce"] = r
            widths[f"{k}x{k}"] = o
        if variant.pool_projection:
            widths["pool proj"] = variant.pool_projection
        rows.append(
            dict(
                type=f"Inception {i}",
                kernel="",
                out=f"H x W x {variant.out_channels}",
                depth=2,
                widths=widths,
                params=block_params(f"inception{i}"),
            )
        )
    rows.append(
        dict(type="Convolution 3", kernel="5x5", out=f"H x W x {arch.output_channels}", depth=1, widths={}, params=params["conv3"])
    )
    return rows


def _printed_for(row_type: str):
    if row_type.startswith("Inception"):
        return PRINTED_PARAMS["Inception"]
    return PRINTED_PARAMS.get(row_type)


def format_architecture_table(arch: ArchitectureSpec) -> str:
    """Text table of the architecture plus a parameter cross-check.

    For the standard 64-wide ``with_7x7`` configuration each block's computed
    kernel count is compared with the printed Params column and mismatches
    are flagged.
    """
    rows = architecture_rows(arch)
    present = {k for r in rows for k in r["widths"]}
    order = ["1x1"] + [f"{k}x{k}{s}" for k in (3, 5, 7, 9) for s in (" reduce", "")] + ["pool proj"]
    width_keys = [k for k in order if k in present]
    compare = arch.width == 64 and arch.variant == "with_7x7" and arch.task == "skin"
    header = ["type", "kernel", "output size", "depth"] + [f"#{k}" for k in width_keys] + ["params"]
    if compare:
        header += ["printed", "check"]
    table = [header]
    for r in rows:
        line = [r["type"], r["kernel"], r["out"], str(r["depth"])]
        line += [str(r["widths"].get(k, "")) for k in width_keys]
        line.append(f"{r['params']:,}")
        if compare:
            printed = _printed_for(r["type"])
            ok = _fmt_k(r["params"]) == printed
            line += [printed, "ok" if ok else "MISMATCH"]
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * wd for wd in widths))

    net = network_spec(arch)

    counts = count_parameters(net)
    lines.append("")
    lines.append(f"conv-layer depth: {net.conv_depth()}")
    lines.append(f"kernel-only parameters: {counts.kernel_only:,}")
    lines.append(f"parameters incl. biases: {counts.total:,}")
    if compare:
        flag = "ok" if _fmt_k(counts.kernel_only) == PRINTED_TOTAL else "MISMATCH"
        lines.append(f"printed overall total: {PRINTED_TOTAL} ({flag})")
    rf = receptive_field(net)
    lines.append(f"receptive field: {rf.rf}x{rf.rf}")
    return "\n".join(lines)
