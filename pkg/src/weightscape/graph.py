"""Scale-parameterized conditional generator: topology, parameter manifest, forward pass.

The network is an entry projection, a chain of residual bottleneck blocks with
conditional batch normalization fed by shortcut connections from the entry
conditioning vector, one self-attention block, and a norm/relu/conv/tanh output
head. Selected blocks double the spatial resolution.

Block internals (bottleneck ratio 4, fixed):

    norm1+relu -> conv1 1x1 (Cin -> Cin/4)
    norm2+relu -> [upsample] -> conv2 3x3
    norm3+relu -> conv3 3x3
    norm4+relu -> conv4 1x1 (Cin/4 -> Cout)
    skip: [upsample] -> first Cout channels of the input

Activations are carried in float64 internally so that badly conditioned
checkpoints (e.g. unit-normal synthetic weights) saturate the output tanh
instead of producing NaNs; stored values and returned images are float32.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError

BOTTLENECK_RATIO = 4
BN_EPS = 1e-5

# Parameter kinds; running statistics are buffers, everything else is trainable.
TRAINABLE_KINDS = (
    "conv_kernel",
    "conv_bias",
    "linear_weight",
    "linear_bias",
    "embedding",
    "scalar_gamma",
)
BUFFER_KINDS = ("bn_running_mean", "bn_running_var")
ALL_KINDS = TRAINABLE_KINDS + BUFFER_KINDS


@functools.total_ordering
@dataclass(frozen=True)
class BlockId:
    """Identifies the owner of a parameter: ENTRY, a numbered block, ATTENTION or OUTPUT."""

    stage: int  # 0 entry, 1 numbered block, 2 attention, 3 output
    index: int = 0

    @classmethod
    def entry(cls) -> "BlockId":
        return cls(0)

    @classmethod
    def block(cls, index: int) -> "BlockId":
        if index < 1:
            raise ConfigError(f"block index must be >= 1, got {index}")
        return cls(1, index)

    @classmethod
    def attention(cls) -> "BlockId":
        return cls(2)

    @classmethod
    def output(cls) -> "BlockId":
        return cls(3)

    @classmethod
    def parse(cls, text: str) -> "BlockId":
        t = text.strip().upper()
        if t == "ENTRY":
            return cls.entry()
        if t == "ATTENTION":
            return cls.attention()
        if t == "OUTPUT":
            return cls.output()
        if t.startswith("B") and t[1:].isdigit():
            return cls.block(int(t[1:]))
        raise ConfigError(f"unknown block name: {text!r}")

    def __str__(self) -> str:
        return {0: "ENTRY", 2: "ATTENTION", 3: "OUTPUT"}.get(self.stage, f"B{self.index}")

    def __lt__(self, other: "BlockId") -> bool:
        return (self.stage, self.index) < (other.stage, other.index)


@dataclass(frozen=True)
class GraphConfig:
    """Topology description; the parameter manifest is a pure function of this."""

    name: str
    latent_dim: int
    num_classes: int
    embed_dim: int
    base_channels: int
    num_blocks: int
    upsample_blocks: frozenset[int]
    attention_after_block: int
    channel_schedule: tuple[tuple[int, int], ...]  # per-block (in, out)
    entry_spatial: int

    @property
    def cond_dim(self) -> int:
        return self.latent_dim + self.embed_dim

    @property
    def output_resolution(self) -> int:
        return self.entry_spatial * (2 ** len(self.upsample_blocks))

    def resolution_after_block(self, k: int) -> int:
        """Spatial size of block k's output (k=0 is the entry stage)."""
        ups = sum(1 for b in self.upsample_blocks if b <= k)
        return self.entry_spatial * (2 ** ups)

    def validate(self) -> None:
        if min(self.latent_dim, self.num_classes, self.embed_dim, self.entry_spatial) < 1:
            raise ConfigError("latent_dim, num_classes, embed_dim, entry_spatial must be >= 1")
        if self.num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if len(self.channel_schedule) != self.num_blocks:
            raise ConfigError(
                f"channel_schedule has {len(self.channel_schedule)} rows "
                f"for {self.num_blocks} blocks"
            )
        if not self.upsample_blocks <= set(range(1, self.num_blocks + 1)):
            raise ConfigError(f"upsample_blocks {sorted(self.upsample_blocks)} out of range")
        if not 1 <= self.attention_after_block <= self.num_blocks:
            raise ConfigError(
                f"attention_after_block {self.attention_after_block} not in "
                f"[1, {self.num_blocks}]"
            )
        prev_out = None
        for k, (cin, cout) in enumerate(self.channel_schedule, start=1):
            if cin < BOTTLENECK_RATIO:
                raise ConfigError(f"block {k}: in channels {cin} below bottleneck ratio")
            if cout < 1:
                raise ConfigError(f"block {k}: out channels {cout} must be >= 1")
            if cout > cin:
                raise ConfigError(
                    f"block {k}: out channels {cout} exceed in channels {cin}; "
                    "the skip path truncates, it cannot widen"
                )
            if prev_out is not None and cin != prev_out:
                raise ConfigError(
                    f"block {k}: in channels {cin} do not chain from previous out {prev_out}"
                )
            prev_out = cout

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "latent_dim": self.latent_dim,
            "num_classes": self.num_classes,
            "embed_dim": self.embed_dim,
            "base_channels": self.base_channels,
            "num_blocks": self.num_blocks,
            "upsample_blocks": sorted(self.upsample_blocks),
            "attention_after_block": self.attention_after_block,
            "channel_schedule": [list(row) for row in self.channel_schedule],
            "entry_spatial": self.entry_spatial,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GraphConfig":
        cfg = cls(
            name=str(d["name"]),
            latent_dim=int(d["latent_dim"]),
            num_classes=int(d["num_classes"]),
            embed_dim=int(d["embed_dim"]),
            base_channels=int(d["base_channels"]),
            num_blocks=int(d["num_blocks"]),
            upsample_blocks=frozenset(int(b) for b in d["upsample_blocks"]),
            attention_after_block=int(d["attention_after_block"]),
            channel_schedule=tuple((int(i), int(o)) for i, o in d["channel_schedule"]),
            entry_spatial=int(d["entry_spatial"]),
        )
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    block: BlockId
    kind: str
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class GeneratorGraph:
    """A validated config plus its canonical parameter manifest."""

    config: GraphConfig
    manifest: tuple[ParamSpec, ...]
    _by_name: Mapping[str, ParamSpec] = field(repr=False, default_factory=dict)

    def spec(self, name: str) -> ParamSpec:
        return self._by_name[name]

    def param_count(self, trainable_only: bool = True) -> int:
        kinds = set(TRAINABLE_KINDS) if trainable_only else set(ALL_KINDS)
        return sum(p.size for p in self.manifest if p.kind in kinds)

    def blocks_present(self) -> list[BlockId]:
        seen: list[BlockId] = []
        for p in self.manifest:
            if p.block not in seen:
                seen.append(p.block)
        return seen


def _norm_specs(prefix: str, block: BlockId, channels: int, cond_dim: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.gain.weight", block, "linear_weight", (channels, cond_dim)),
        ParamSpec(f"{prefix}.gain.bias", block, "linear_bias", (channels,)),
        ParamSpec(f"{prefix}.shift.weight", block, "linear_weight", (channels, cond_dim)),
        ParamSpec(f"{prefix}.shift.bias", block, "linear_bias", (channels,)),
        ParamSpec(f"{prefix}.running_mean", block, "bn_running_mean", (channels,)),
        ParamSpec(f"{prefix}.running_var", block, "bn_running_var", (channels,)),
    ]


def _conv_specs(prefix: str, block: BlockId, cin: int, cout: int, k: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.kernel", block, "conv_kernel", (cout, cin, k, k)),
        ParamSpec(f"{prefix}.bias", block, "conv_bias", (cout,)),
    ]


def attention_widths(channels: int) -> tuple[int, int]:
    """Query/key and value projection widths: C/8 and C/2, floored at 1."""
    return max(channels // 8, 1), max(channels // 2, 1)


def build_graph(config: GraphConfig) -> GeneratorGraph:
    """Construct the canonical manifest for a config; raises ConfigError first."""
    config.validate()
    d = config.cond_dim
    s = config.entry_spatial
    c1 = config.channel_schedule[0][0]
    params: list[ParamSpec] = []
    entry = BlockId.entry()
    params.append(ParamSpec("entry.class_embed", entry, "embedding",
                            (config.num_classes, config.embed_dim)))
    params.append(ParamSpec("entry.project.weight", entry, "linear_weight", (c1 * s * s, d)))
    params.append(ParamSpec("entry.project.bias", entry, "linear_bias", (c1 * s * s,)))

    for k, (cin, cout) in enumerate(config.channel_schedule, start=1):
        cmid = cin // BOTTLENECK_RATIO
        blk = BlockId.block(k)
        prefix = f"b{k:02d}"
        stages = ((cin, cin, cmid, 1), (cmid, cmid, cmid, 3), (cmid, cmid, cmid, 3),
                  (cmid, cmid, cout, 1))
        for j, (norm_c, conv_in, conv_out, ksize) in enumerate(stages, start=1):
            params.extend(_norm_specs(f"{prefix}.norm{j}", blk, norm_c, d))
            params.extend(_conv_specs(f"{prefix}.conv{j}", blk, conv_in, conv_out, ksize))
        if k == config.attention_after_block:
            cq, cv = attention_widths(cout)
            attn = BlockId.attention()
            params.extend(_conv_specs("attn.query", attn, cout, cq, 1))
            params.extend(_conv_specs("attn.key", attn, cout, cq, 1))
            params.extend(_conv_specs("attn.value", attn, cout, cv, 1))
            params.extend(_conv_specs("attn.out", attn, cv, cout, 1))
            params.append(ParamSpec("attn.gamma", attn, "scalar_gamma", (1,)))

    c_last = config.channel_schedule[-1][1]
    out = BlockId.output()
    params.extend(_norm_specs("head.norm", out, c_last, d))
    params.extend(_conv_specs("head.conv", out, c_last, 3, 3))

    return GeneratorGraph(config=config, manifest=tuple(params),
                          _by_name={p.name: p for p in params})


def _conditional_norm(
    x: np.ndarray, cond: np.ndarray, tensors: Mapping[str, np.ndarray], prefix: str
) -> np.ndarray:
    gain = 1.0 + ops.linear(cond, tensors[f"{prefix}.gain.weight"], tensors[f"{prefix}.gain.bias"])
    shift = ops.linear(cond, tensors[f"{prefix}.shift.weight"], tensors[f"{prefix}.shift.bias"])
    return ops.batch_norm_inference(
        x, tensors[f"{prefix}.running_mean"], tensors[f"{prefix}.running_var"],
        gain, shift, BN_EPS,
    )


def conditional_gain_bias(
    cond: np.ndarray, gain_weight: np.ndarray, gain_bias: np.ndarray,
    shift_weight: np.ndarray, shift_bias: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gain/bias delivered to a norm layer: gain is centered at 1 so zeroed
    projections reduce to plain normalization."""
    gain = 1.0 + ops.linear(cond, gain_weight, gain_bias)
    shift = ops.linear(cond, shift_weight, shift_bias)
    return gain, shift


def _residual_block(
    x: np.ndarray, cond: np.ndarray, tensors: Mapping[str, np.ndarray],
    k: int, cout: int, upsample: bool,
) -> np.ndarray:
    p = f"b{k:02d}"
    h = ops.relu(_conditional_norm(x, cond, tensors, f"{p}.norm1"))
    h = ops.conv2d(h, tensors[f"{p}.conv1.kernel"], tensors[f"{p}.conv1.bias"], padding=0)
    h = ops.relu(_conditional_norm(h, cond, tensors, f"{p}.norm2"))
    if upsample:
        h = ops.upsample_nearest_2x(h)
    h = ops.conv2d(h, tensors[f"{p}.conv2.kernel"], tensors[f"{p}.conv2.bias"], padding=1)
    h = ops.relu(_conditional_norm(h, cond, tensors, f"{p}.norm3"))
    h = ops.conv2d(h, tensors[f"{p}.conv3.kernel"], tensors[f"{p}.conv3.bias"], padding=1)
    h = ops.relu(_conditional_norm(h, cond, tensors, f"{p}.norm4"))
    h = ops.conv2d(h, tensors[f"{p}.conv4.kernel"], tensors[f"{p}.conv4.bias"], padding=0)
    skip = ops.upsample_nearest_2x(x) if upsample else x
    skip = skip[:cout]
    return h + skip


def forward(
    graph: GeneratorGraph,
    checkpoint: "Checkpoint",
    z: np.ndarray,
    class_index: int,
    tap: Callable[[str, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Generate a (3, R, R) float32 image in [-1, 1] from latent z and a class index.

    Deterministic in (checkpoint, z, class_index). `tap(stage, activation)` is
    called after the entry stage, every block, attention, and the head;
    intended for tests and inspection only.
    """
    from .checkpoint import validate_against  # local import, avoids cycle

    validate_against(graph, checkpoint)
    cfg = graph.config
    if not 0 <= class_index < cfg.num_classes:
        raise ShapeError(f"class index {class_index} not in [0, {cfg.num_classes})")
    if z.shape != (cfg.latent_dim,):
        raise ShapeError(f"latent must be ({cfg.latent_dim},), got {z.shape}")

    t = checkpoint.tensors()
    embed = t["entry.class_embed"][class_index].astype(np.float64)
    cond = np.concatenate([z.astype(np.float64), embed])
    x = ops.linear(cond, t["entry.project.weight"], t["entry.project.bias"])
    c1, s = cfg.channel_schedule[0][0], cfg.entry_spatial
    x = x.reshape(c1, s, s)
    if tap:
        tap("entry", x)

    for k, (cin, cout) in enumerate(cfg.channel_schedule, start=1):
        x = _residual_block(x, cond, t, k, cout, upsample=k in cfg.upsample_blocks)
        if tap:
            tap(f"b{k:02d}", x)
        if k == cfg.attention_after_block:
            params = ops.AttentionParams(
                query_kernel=t["attn.query.kernel"], query_bias=t["attn.query.bias"],
                key_kernel=t["attn.key.kernel"], key_bias=t["attn.key.bias"],
                value_kernel=t["attn.value.kernel"], value_bias=t["attn.value.bias"],
                out_kernel=t["attn.out.kernel"], out_bias=t["attn.out.bias"],
                gamma=float(t["attn.gamma"][0]),
            )
            x = ops.self_attention(x, params)
            if tap:
                tap("attn", x)

    x = ops.relu(_conditional_norm(x, cond, t, "head.norm"))
    x = ops.conv2d(x, t["head.conv.kernel"], t["head.conv.bias"], padding=1)
    x = ops.tanh(x)
    if tap:
        tap("head", x)
    return x.astype(np.float32)
