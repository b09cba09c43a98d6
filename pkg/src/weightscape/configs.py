"""Built-in generator configurations.

`tiny64` is the desk-scale config used by the test and acceptance suites.
`paper256` mirrors the full-scale 256x256 deep generator layout: 128-d latent,
1000 classes, 13 blocks with upsampling at {2,4,6,8,11,13}, attention after
block 8, roughly 54M trainable parameters. Rendering it works but is slow;
it exists mainly so the manifest can be validated at full scale.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError
from .graph import GraphConfig


def _schedule(base: int, multipliers: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    return tuple((base * i, base * o) for i, o in multipliers)


TINY64 = GraphConfig(
    name="tiny64",
    latent_dim=16,
    num_classes=10,
    embed_dim=8,
    base_channels=24,
    num_blocks=7,
    upsample_blocks=frozenset({2, 4, 6}),
    attention_after_block=5,
    channel_schedule=_schedule(
        24, [(16, 16), (16, 16), (16, 4), (4, 4), (4, 2), (2, 2), (2, 1)]
    ),
    entry_spatial=8,
)

PAPER256 = GraphConfig(
    name="paper256",
    latent_dim=128,
    num_classes=1000,
    embed_dim=128,
    base_channels=128,
    num_blocks=13,
    upsample_blocks=frozenset({2, 4, 6, 8, 11, 13}),
    attention_after_block=8,
    channel_schedule=_schedule(
        128,
        [
            (16, 16), (16, 16), (16, 16), (16, 8),
            (8, 8), (8, 8), (8, 4), (4, 4),
            (4, 4), (4, 2), (2, 2), (2, 1), (1, 1),
        ],
    ),
    entry_spatial=4,
)

BUILTIN = {cfg.name: cfg for cfg in (TINY64, PAPER256)}


def resolve_config(name_or_path: str) -> GraphConfig:
    """Look up a built-in config by name, or load a JSON config file."""
    if name_or_path in BUILTIN:
        return BUILTIN[name_or_path]
    path = Path(name_or_path)
    if path.is_file():
        try:
            return GraphConfig.from_dict(json.loads(path.read_text()))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    raise ConfigError(
        f"unknown config {name_or_path!r}; built-ins: {', '.join(sorted(BUILTIN))}"
    )
