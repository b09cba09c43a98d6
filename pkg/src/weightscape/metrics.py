"""Quantitative comparisons of images and checkpoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, WeightStats
from .errors import ShapeError
from .graph import BlockId, GeneratorGraph, forward
from .perturb import perturb_multiplicative


def image_l2(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-square difference over all elements."""
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.mean(d * d)))


def channel_histogram(image: np.ndarray, bins: int = 32) -> np.ndarray:
    """(3, bins) counts over the fixed value range [-1, 1], per channel."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"image must be (3,R,R), got {image.shape}")
    out = np.zeros((3, bins), dtype=np.int64)
    for c in range(3):
        out[c], _ = np.histogram(np.clip(image[c], -1.0, 1.0), bins=bins, range=(-1.0, 1.0))
    return out


def divergence_curve(
    base: Checkpoint,
    graph: GeneratorGraph,
    alphas: list[float],
    seed: int,
    z: np.ndarray,
    class_index: int,
) -> list[tuple[float, float]]:
    """Image distance from the base output as the perturbation strength grows.

    alphas must be sorted ascending and start at 0; the curve starts at
    exactly 0.0 because alpha=0 is the identity.
    """
    if not alphas or alphas[0] != 0.0 or sorted(alphas) != list(alphas):
        raise ShapeError("alphas must be sorted ascending and start at 0")
    reference = forward(graph, base, z, class_index)
    curve = []
    for a in alphas:
        derived = perturb_multiplicative(base, a, seed)
        img = forward(graph, derived, z, class_index)
        curve.append((a, image_l2(reference, img)))
    return curve


@dataclass(frozen=True)
class StatsMatchRecord:
    name: str
    block: BlockId
    size: int
    status: str              # "pass" | "fail" | "identical" | "skipped"
    mean_z_max: float        # worst |z| of the sample means vs base means
    std_rel_max: float       # worst |sample_std/base_std - 1|

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "identical")


def stats_match_report(
    replaced: Checkpoint,
    base_stats: WeightStats,
    targets: frozenset[BlockId] | set[BlockId],
    base: Checkpoint | None = None,
    min_elements: int = 10_000,
    mean_sigmas: float = 4.0,
    std_rel_tol: float = 0.05,
) -> list[StatsMatchRecord]:
    """Check replaced target entries against base statistics.

    Means must sit within mean_sigmas standard errors of the base mean and
    sample stds within std_rel_tol of the base std, per filter position for
    per-pixel conv statistics. Entries smaller than min_elements are reported
    as skipped; entries byte-identical to `base` (when given) as identical.
    """
    records = []
    for e in replaced.entries:
        if e.block not in targets:
            continue
        if base is not None:
            be = base.entry(e.name)
            if be.data.tobytes() == e.data.tobytes():
                records.append(StatsMatchRecord(e.name, e.block, e.size, "identical", 0.0, 0.0))
                continue
        if e.size < min_elements:
            records.append(StatsMatchRecord(e.name, e.block, e.size, "skipped", 0.0, 0.0))
            continue
        st = base_stats[e.name]
        d = e.data.astype(np.float64)
        if st.per_pixel:
            n = d.shape[0] * d.shape[1]  # samples per filter position
            sample_mean = d.mean(axis=(0, 1))
            sample_std = d.std(axis=(0, 1))
        else:
            n = d.size
            sample_mean = np.atleast_1d(d.mean())
            sample_std = np.atleast_1d(d.std())
        base_mean = np.atleast_1d(np.asarray(st.mean, dtype=np.float64))
        base_std = np.atleast_1d(np.asarray(st.std, dtype=np.float64))
        se = np.where(base_std > 0, base_std / np.sqrt(n), np.inf)
        mean_z = np.abs(sample_mean - base_mean) / se
        with np.errstate(divide="ignore", invalid="ignore"):
            std_rel = np.where(
                base_std > 0,
                np.abs(sample_std / base_std - 1.0),
                np.where(sample_std == 0, 0.0, np.inf),
            )
        ok = bool((mean_z <= mean_sigmas).all() and (std_rel <= std_rel_tol).all())
        records.append(
            StatsMatchRecord(
                e.name, e.block, e.size, "pass" if ok else "fail",
                float(mean_z.max()), float(std_rel.max()),
            )
        )
    return records
