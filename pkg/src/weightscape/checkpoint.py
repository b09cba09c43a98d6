"""Portable checkpoint container: block-tagged named tensors, bit-exact on disk.

File layout (all integers little-endian):

    bytes 0..7    magic  b"WSCKPT\\x00\\x01"... actually b"WSCKPT01"
    u32           format version (currently 1)
    u64           manifest byte length
    manifest      UTF-8 text, line-oriented:
                      meta <key> <json-value>
                      entry <name> <block> <kind> <dtype> <d0,d1,..> <offset> <count>
    payload       raw float32 data, row-major, at the declared offsets
    u64           first 8 bytes of SHA-256 over the payload

load(save(x)) reproduces x bit for bit, including entry order and metadata.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from . import rng
from .errors import (
    ChecksumError,
    DuplicateNameError,
    FormatError,
    ManifestMismatchError,
    TruncatedError,
    VersionError,
)
from .graph import BlockId, GeneratorGraph, GraphConfig, ParamSpec, build_graph

MAGIC = b"WSCKPT01"
FORMAT_VERSION = 1


def _payload_digest(payload: bytes) -> int:
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


@dataclass(frozen=True)
class Entry:
    name: str
    block: BlockId
    kind: str
    data: np.ndarray  # float32, C-contiguous

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)


@dataclass
class Checkpoint:
    """Ordered, named, block-tagged parameter collection. Treat as immutable."""

    entries: list[Entry]
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.name in seen:
                raise DuplicateNameError(f"duplicate entry name {e.name!r}")
            seen.add(e.name)
            if e.kind == "bn_running_var" and np.any(e.data < 0):
                raise FormatError(f"running variance entry {e.name!r} has negative values")

    def content_key(self) -> str:
        """Hex digest over the payload; identifies the checkpoint's values."""
        h = hashlib.sha256()
        for e in self.entries:
            h.update(e.name.encode("utf-8"))
            h.update(e.data.tobytes())
        return h.hexdigest()

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def entry(self, name: str) -> Entry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def tensors(self) -> dict[str, np.ndarray]:
        return {e.name: e.data for e in self.entries}

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def replace_data(self, new_data: Mapping[str, np.ndarray], meta: dict[str, str]) -> "Checkpoint":
        """Copy with some entries' data swapped; untouched entries share their arrays."""
        out = [
            Entry(e.name, e.block, e.kind, np.ascontiguousarray(new_data[e.name], dtype=np.float32))
            if e.name in new_data else e
            for e in self.entries
        ]
        return Checkpoint(entries=out, meta=dict(meta))


def save(checkpoint: Checkpoint, path: str | Path) -> None:
    lines = []
    for key in sorted(checkpoint.meta):
        value = checkpoint.meta[key]
        if any(c in key for c in " \n") or "\n" in value:
            raise ValueError(f"meta key/value must be single-line, got {key!r}")
        lines.append(f"meta {key} {value}")
    offset = 0
    chunks = []
    for e in checkpoint.entries:
        if " " in e.name or "\n" in e.name:
            raise ValueError(f"entry name must not contain whitespace: {e.name!r}")
        data = np.ascontiguousarray(e.data, dtype=np.float32)
        shape = ",".join(str(d) for d in data.shape)
        lines.append(f"entry {e.name} {e.block} {e.kind} f32 {shape} {offset} {data.size}")
        chunks.append(data.tobytes())
        offset += data.size * 4
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    payload = b"".join(chunks)

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(payload)
        f.write(struct.pack("<Q", _payload_digest(payload)))


def load(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 12 or raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (manifest_len,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    if pos + manifest_len > len(raw):
        raise TruncatedError(f"{path}: manifest declares {manifest_len} bytes, file too short")
    manifest = raw[pos : pos + manifest_len].decode("utf-8")
    pos += manifest_len

    meta: dict[str, str] = {}
    records: list[tuple[str, BlockId, str, tuple[int, ...], int, int]] = []
    for line in manifest.splitlines():
        if not line:
            continue
        tag, rest = line.split(" ", 1)
        if tag == "meta":
            key, value = rest.split(" ", 1)
            meta[key] = value
        elif tag == "entry":
            name, block_s, kind, dtype, shape_s, offset_s, count_s = rest.split(" ")
            if dtype != "f32":
                raise FormatError(f"{path}: unsupported dtype {dtype!r} for {name}")
            shape = tuple(int(d) for d in shape_s.split(","))
            records.append((name, BlockId.parse(block_s), kind, shape, int(offset_s), int(count_s)))
        else:
            raise FormatError(f"{path}: unknown manifest record {tag!r}")

    payload_len = max((off + cnt * 4 for *_, off, cnt in records), default=0)
    if pos + payload_len + 8 > len(raw):
        short = next(
            (name for name, *_rest, off, cnt in records if pos + off + cnt * 4 + 8 > len(raw)),
            records[-1][0] if records else "<none>",
        )
        raise TruncatedError(f"{path}: payload truncated at entry {short!r}")
    payload = raw[pos : pos + payload_len]
    (digest,) = struct.unpack_from("<Q", raw, pos + payload_len)
    if digest != _payload_digest(payload):
        raise ChecksumError(f"{path}: payload checksum mismatch")

    entries = []
    for name, block, kind, shape, off, cnt in records:
        if int(np.prod(shape)) != cnt:
            raise FormatError(f"{path}: entry {name!r} shape {shape} does not hold {cnt} elements")
        arr = np.frombuffer(payload, dtype="<f4", count=cnt, offset=off).reshape(shape)
        entries.append(Entry(name, block, kind, np.ascontiguousarray(arr)))
    return Checkpoint(entries=entries, meta=meta)


# -- synthesis ---------------------------------------------------------------

def _fan_in(spec: ParamSpec) -> int:
    if spec.kind == "conv_kernel":
        return spec.shape[1] * spec.shape[2] * spec.shape[3]
    if spec.kind == "linear_weight":
        return spec.shape[1]
    return 1


def synthesize(config: GraphConfig, seed: int, scheme: str = "unit_normal") -> Checkpoint:
    """Deterministic stand-in weights for a config.

    unit_normal draws every trainable entry from N(0, 1). scaled_fan_in draws
    conv kernels and linear weights with std 1/sqrt(fan_in), zeroes the biases
    and the attention gamma, and keeps embeddings at unit scale; it produces
    activation magnitudes close to a trained network's and is the better base
    for rendering. Both set running means to 0 and running variances to 1.
    """
    if scheme not in ("unit_normal", "scaled_fan_in"):
        raise ValueError(f"unknown synthesis scheme {scheme!r}")
    graph = build_graph(config)
    entries = []
    for spec in graph.manifest:
        if spec.kind == "bn_running_mean":
            data = np.zeros(spec.shape, dtype=np.float32)
        elif spec.kind == "bn_running_var":
            data = np.ones(spec.shape, dtype=np.float32)
        elif scheme == "unit_normal":
            data = rng.normals(seed, spec.name, spec.size).astype(np.float32).reshape(spec.shape)
        else:  # scaled_fan_in
            if spec.kind in ("conv_bias", "linear_bias", "scalar_gamma"):
                data = np.zeros(spec.shape, dtype=np.float32)
            else:
                std = 1.0 if spec.kind == "embedding" else 1.0 / np.sqrt(_fan_in(spec))
                g = rng.normals(seed, spec.name, spec.size) * std
                data = g.astype(np.float32).reshape(spec.shape)
        entries.append(Entry(spec.name, spec.block, spec.kind, data))
    meta = {"config": config.name, "seed": str(seed), "scheme": scheme}
    return Checkpoint(entries=entries, meta=meta)


def validate_against(graph: GeneratorGraph, checkpoint: Checkpoint) -> None:
    """Raise ManifestMismatchError listing missing, extra and mis-shaped entries."""
    want = {p.name: p for p in graph.manifest}
    have = {e.name: e for e in checkpoint.entries}
    missing = [n for n in want if n not in have]
    extra = [n for n in have if n not in want]
    misshaped = [
        f"{n} (have {have[n].shape}, want {want[n].shape})"
        for n in want
        if n in have and have[n].shape != want[n].shape
    ]
    if missing or extra or misshaped:
        parts = []
        if missing:
            parts.append("missing: " + ", ".join(missing[:8]))
        if extra:
            parts.append("extra: " + ", ".join(extra[:8]))
        if misshaped:
            parts.append("mis-shaped: " + ", ".join(misshaped[:8]))
        raise ManifestMismatchError("; ".join(parts))


# -- statistics and diff ------------------------------------------------------

@dataclass(frozen=True)
class EntryStats:
    """Population mean/std; arrays of shape (kH, kW) for conv kernels, scalars otherwise."""

    mean: np.ndarray
    std: np.ndarray
    per_pixel: bool


WeightStats = dict[str, EntryStats]


def compute_stats(checkpoint: Checkpoint, per_pixel_conv: bool = True) -> WeightStats:
    """Population (1/n) statistics per entry.

    Conv kernels get one mean/std per spatial filter position, taken over the
    C_out x C_in axes; every other kind gets whole-entry scalars. Pass
    per_pixel_conv=False to force whole-entry statistics everywhere.
    """
    stats: WeightStats = {}
    for e in checkpoint.entries:
        d = e.data.astype(np.float64)
        if e.kind == "conv_kernel" and per_pixel_conv:
            mean = d.mean(axis=(0, 1))
            std = d.std(axis=(0, 1))
            stats[e.name] = EntryStats(mean=mean, std=std, per_pixel=True)
        else:
            stats[e.name] = EntryStats(
                mean=np.float64(d.mean()), std=np.float64(d.std()), per_pixel=False
            )
    return stats


@dataclass(frozen=True)
class EntryDiff:
    name: str
    block: BlockId
    size: int
    max_abs_diff: float
    differing: int


def diff(a: Checkpoint, b: Checkpoint) -> list[EntryDiff]:
    """Per-entry comparison; both checkpoints must share a manifest."""
    if a.names() != b.names():
        raise ManifestMismatchError("checkpoints have different entry lists")
    out = []
    for ea, eb in zip(a.entries, b.entries):
        if ea.shape != eb.shape:
            raise ManifestMismatchError(
                f"entry {ea.name!r}: shapes {ea.shape} vs {eb.shape}"
            )
        delta = np.abs(ea.data.astype(np.float64) - eb.data.astype(np.float64))
        out.append(
            EntryDiff(
                name=ea.name,
                block=ea.block,
                size=ea.size,
                max_abs_diff=float(delta.max(initial=0.0)),
                differing=int(np.count_nonzero(delta)),
            )
        )
    return out
