"""Latent sampling, pixel mapping, and comparison-grid composition.

A grid has one row per (class, latent) pair and one column per checkpoint
variant; every tile in a row is generated from bit-identical (z, class)
inputs. Grids encode to PNG (lossless, deterministic bytes) with a JSON
provenance sidecar from which the image is reproducible.
"""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import rng
from .checkpoint import Checkpoint, validate_against
from .errors import ShapeError
from .graph import GeneratorGraph, forward

THREADS_ENV = "WEIGHTSCAPE_THREADS"
_LATENT_STREAM = "latents"


def thread_count() -> int:
    try:
        n = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        n = 1
    return max(n, 1)


def sample_latents(seed: int, count: int, latent_dim: int) -> list[np.ndarray]:
    """count i.i.d. standard-normal latents; prefix-stable in count."""
    if count < 1:
        raise ShapeError(f"latent count must be >= 1, got {count}")
    draws = rng.normals(seed, _LATENT_STREAM, count * latent_dim).astype(np.float32)
    return [draws[i * latent_dim : (i + 1) * latent_dim].copy() for i in range(count)]


def to_pixels(image: np.ndarray) -> np.ndarray:
    """(3,R,R) values in [-1,1] -> (R,R,3) uint8; -1 -> 0, +1 -> 255, out-of-range clamped.

    Rounding is half-away-from-zero, so 0.0 maps to 128.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"image must be (3,R,R), got {image.shape}")
    v = np.clip(image.astype(np.float64), -1.0, 1.0)
    scaled = (v + 1.0) * 127.5
    return np.floor(scaled + 0.5).astype(np.uint8).transpose(1, 2, 0)


def from_pixels(pixels: np.ndarray) -> np.ndarray:
    """Inverse of to_pixels up to quantization: (R,R,3) uint8 -> (3,R,R) float32."""
    return (pixels.astype(np.float32).transpose(2, 0, 1) / 255.0) * 2.0 - 1.0


@dataclass(frozen=True)
class VariantSpec:
    label: str
    checkpoint: Checkpoint


@dataclass(frozen=True)
class RenderRequest:
    """Inputs for one comparison grid.

    Variants are columns, in order; by convention the caller puts the base
    checkpoint last. If latent_index is set, only that element of the latent
    stream is used and latent_count is ignored (one row per class).
    """

    latent_seed: int
    latent_count: int
    classes: tuple[int, ...]
    variants: tuple[VariantSpec, ...]
    latent_index: int | None = None


@dataclass(frozen=True)
class ImageGrid:
    rows: int
    cols: int
    tile_size: int
    pixels: np.ndarray  # (rows*R, cols*R, 3) uint8
    row_inputs: tuple[tuple[np.ndarray, int], ...]  # (z, class) per row
    variant_labels: tuple[str, ...]
    provenance: dict

    def tile(self, row: int, col: int) -> np.ndarray:
        r = self.tile_size
        return self.pixels[row * r : (row + 1) * r, col * r : (col + 1) * r]

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


def render_grid(request: RenderRequest, graph: GeneratorGraph) -> ImageGrid:
    """Render every (row, variant) tile and compose the grid; deterministic."""
    if not request.variants:
        raise ShapeError("render request needs at least one variant")
    if not request.classes:
        raise ShapeError("render request needs at least one class")
    for v in request.variants:
        validate_against(graph, v.checkpoint)

    if request.latent_index is not None:
        latents = sample_latents(
            request.latent_seed, request.latent_index + 1, graph.config.latent_dim
        )[request.latent_index :]
    else:
        latents = sample_latents(request.latent_seed, request.latent_count,
                                 graph.config.latent_dim)
    row_inputs = [(z, c) for c in request.classes for z in latents]
    rows, cols = len(row_inputs), len(request.variants)
    r = graph.config.output_resolution
    pixels = np.zeros((rows * r, cols * r, 3), dtype=np.uint8)

    def paint(idx: int) -> None:
        row, col = divmod(idx, cols)
        z, c = row_inputs[row]
        img = forward(graph, request.variants[col].checkpoint, z, c)
        pixels[row * r : (row + 1) * r, col * r : (col + 1) * r] = to_pixels(img)

    jobs = range(rows * cols)
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(paint, jobs))
    else:
        for idx in jobs:
            paint(idx)

    provenance = {
        "graph": graph.config.to_dict(),
        "latent_seed": request.latent_seed,
        "latent_count": request.latent_count,
        "latent_index": request.latent_index,
        "classes": list(request.classes),
        "variants": [
            {"label": v.label, "plan": v.checkpoint.meta.get("plan"),
             "source": v.checkpoint.meta.get("source")}
            for v in request.variants
        ],
        "rows": rows,
        "cols": cols,
        "tile_size": r,
    }
    return ImageGrid(
        rows=rows, cols=cols, tile_size=r, pixels=pixels,
        row_inputs=tuple(row_inputs), variant_labels=tuple(v.label for v in request.variants),
        provenance=provenance,
    )


def write_grid(grid: ImageGrid, out_path: str | Path) -> Path:
    """Write the PNG and its provenance sidecar (<out>.provenance.json)."""
    out_path = Path(out_path)
    out_path.write_bytes(grid.to_png_bytes())
    sidecar = out_path.with_suffix(out_path.suffix + ".provenance.json")
    sidecar.write_text(json.dumps(grid.provenance, indent=2, sort_keys=True) + "\n")
    return sidecar
