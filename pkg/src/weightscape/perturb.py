"""Weight-space interventions: derive new checkpoints from a base checkpoint.

Three modes, all pure functions of (base, plan):

* multiplicative: every affected element is scaled by (1 + alpha * g) with g
  a standard-normal draw from the entry's seed stream; exact zeros stay zero.
* block_randomize: all parameters of the target blocks are replaced by normal
  draws whose mean/std match the base entry's statistics (per filter position
  for conv kernels); everything outside the targets is untouched, bit for bit.
* masked_substitute: a per-element random mask selects a fraction of each
  matching entry; selected elements are replaced by statistics-matched draws,
  unselected elements are untouched.

Every plan serializes to a canonical one-line text form that round-trips and
is embedded in derived checkpoints as provenance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .checkpoint import Checkpoint, EntryStats, compute_stats
from .errors import PlanError
from .graph import BlockId, TRAINABLE_KINDS

log = logging.getLogger(__name__)

MODES = ("multiplicative", "block_randomize", "masked_substitute")
DEFAULT_KIND_FILTER = frozenset(TRAINABLE_KINDS)


@dataclass(frozen=True)
class MaskSpec:
    """Selects elements for masked substitution: glob-style name pattern,
    per-entry element fraction, and the seed of the mask stream."""

    pattern: str
    fraction: float
    seed: int

    def validate(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise PlanError(f"mask fraction must be in [0, 1], got {self.fraction}")
        if not self.pattern:
            raise PlanError("mask pattern must be non-empty")


@dataclass(frozen=True)
class PerturbationPlan:
    mode: str
    seed: int
    alpha: float = 0.0
    target_blocks: frozenset[BlockId] = frozenset()
    mask: MaskSpec | None = None
    kind_filter: frozenset[str] = DEFAULT_KIND_FILTER
    per_pixel_stats: bool = True

    def validate(self) -> None:
        if self.mode not in MODES:
            raise PlanError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.alpha < 0:
            raise PlanError(f"alpha must be >= 0, got {self.alpha}")
        if self.mode == "block_randomize" and not self.target_blocks:
            raise PlanError("block_randomize needs at least one target block")
        if self.mode == "masked_substitute":
            if self.mask is None:
                raise PlanError("masked_substitute needs a mask spec")
            self.mask.validate()
        unknown = self.kind_filter - set(TRAINABLE_KINDS)
        if unknown:
            raise PlanError(f"unknown kinds in filter: {sorted(unknown)}")

    def to_text(self) -> str:
        """Canonical single-line form; fixed field order, sorted sets."""
        fields = [f"mode={self.mode}", f"alpha={self.alpha:g}", f"seed={self.seed}"]
        targets = ",".join(str(b) for b in sorted(self.target_blocks)) or "-"
        fields.append(f"targets={targets}")
        if self.mask is not None:
            fields.append(f"mask={self.mask.pattern}:{self.mask.fraction:g}:{self.mask.seed}")
        else:
            fields.append("mask=-")
        kinds = ",".join(sorted(self.kind_filter))
        fields.append(f"kinds={kinds}")
        fields.append(f"stats={'per_pixel' if self.per_pixel_stats else 'whole_entry'}")
        return " ".join(fields)

    @classmethod
    def from_text(cls, text: str) -> "PerturbationPlan":
        kv: dict[str, str] = {}
        for token in text.strip().split(" "):
            if "=" not in token:
                raise PlanError(f"malformed plan token {token!r}")
            k, v = token.split("=", 1)
            kv[k] = v
        try:
            mask = None
            if kv.get("mask", "-") != "-":
                pattern, fraction, mseed = kv["mask"].rsplit(":", 2)
                mask = MaskSpec(pattern=pattern, fraction=float(fraction), seed=int(mseed))
            targets = frozenset(
                BlockId.parse(t) for t in kv["targets"].split(",") if t and t != "-"
            )
            plan = cls(
                mode=kv["mode"],
                alpha=float(kv["alpha"]),
                seed=int(kv["seed"]),
                target_blocks=targets,
                mask=mask,
                kind_filter=frozenset(kv["kinds"].split(",")),
                per_pixel_stats=kv["stats"] == "per_pixel",
            )
        except (KeyError, ValueError) as exc:
            raise PlanError(f"cannot parse plan text {text!r}: {exc}") from exc
        plan.validate()
        return plan


def _derived_meta(base: Checkpoint, plan: PerturbationPlan) -> dict[str, str]:
    meta = dict(base.meta)
    meta["plan"] = plan.to_text()
    return meta


def _matched_draws(entry_name: str, shape: tuple[int, ...], stats: EntryStats, seed: int) -> np.ndarray:
    g = rng.normals(seed, entry_name, int(np.prod(shape))).reshape(shape)
    if stats.per_pixel:
        # stats arrays are (kH, kW); broadcast over the leading C_out, C_in axes.
        return stats.mean + stats.std * g
    return float(stats.mean) + float(stats.std) * g


def perturb_multiplicative(
    base: Checkpoint,
    alpha: float,
    seed: int,
    kind_filter: frozenset[str] = DEFAULT_KIND_FILTER,
) -> Checkpoint:
    """Elementwise out = base * (1 + alpha * g); kinds outside the filter are copied."""
    plan = PerturbationPlan(mode="multiplicative", alpha=alpha, seed=seed, kind_filter=kind_filter)
    return apply_plan(base, plan)


def randomize_block(base: Checkpoint, targets: frozenset[BlockId] | set[BlockId], seed: int,
                    per_pixel_stats: bool = True) -> Checkpoint:
    """Replace every entry of the target blocks with statistics-matched draws."""
    plan = PerturbationPlan(
        mode="block_randomize", seed=seed, target_blocks=frozenset(targets),
        per_pixel_stats=per_pixel_stats,
    )
    return apply_plan(base, plan)


def masked_substitute(base: Checkpoint, mask: MaskSpec, seed: int,
                      per_pixel_stats: bool = True) -> Checkpoint:
    """Replace a random per-entry fraction of elements on entries matching the pattern."""
    plan = PerturbationPlan(
        mode="masked_substitute", seed=seed, mask=mask, per_pixel_stats=per_pixel_stats,
    )
    return apply_plan(base, plan)


def apply_plan(base: Checkpoint, plan: PerturbationPlan) -> Checkpoint:
    plan.validate()
    if plan.mode == "multiplicative":
        new = _apply_multiplicative(base, plan)
    elif plan.mode == "block_randomize":
        new = _apply_block_randomize(base, plan)
    else:
        new = _apply_masked_substitute(base, plan)
    return base.replace_data(new, _derived_meta(base, plan))


def _apply_multiplicative(base: Checkpoint, plan: PerturbationPlan) -> dict[str, np.ndarray]:
    if plan.alpha == 0.0:
        return {}
    new = {}
    for e in base.entries:
        if e.kind not in plan.kind_filter:
            continue
        g = rng.normals(plan.seed, e.name, e.size).reshape(e.shape)
        scaled = e.data.astype(np.float64) * (1.0 + plan.alpha * g)
        new[e.name] = scaled.astype(np.float32)
    return new


def _apply_block_randomize(base: Checkpoint, plan: PerturbationPlan) -> dict[str, np.ndarray]:
    present = {e.block for e in base.entries}
    empty = [str(b) for b in sorted(plan.target_blocks) if b not in present]
    if empty:
        raise PlanError(f"target blocks own no entries: {', '.join(empty)}")
    stats = compute_stats(base, per_pixel_conv=plan.per_pixel_stats)
    new = {}
    for e in base.entries:
        if e.block not in plan.target_blocks:
            continue
        draws = _matched_draws(e.name, e.shape, stats[e.name], plan.seed)
        if e.kind == "bn_running_var":
            # variance buffers must stay non-negative
            draws = np.abs(draws)
        new[e.name] = draws.astype(np.float32)
    return new


def _apply_masked_substitute(base: Checkpoint, plan: PerturbationPlan) -> dict[str, np.ndarray]:
    from fnmatch import fnmatchcase

    assert plan.mask is not None
    matched = [e for e in base.entries if fnmatchcase(e.name, plan.mask.pattern)]
    if not matched:
        log.warning("mask pattern %r matches no entries; output is identical to base",
                    plan.mask.pattern)
        return {}
    if plan.mask.fraction == 0.0:
        return {}
    stats = compute_stats(base, per_pixel_conv=plan.per_pixel_stats)
    new = {}
    for e in matched:
        u = rng.uniforms(plan.mask.seed, e.name, e.size, purpose="mask").reshape(e.shape)
        select = u < plan.mask.fraction
        if not select.any():
            continue
        draws = _matched_draws(e.name, e.shape, stats[e.name], plan.seed)
        if e.kind == "bn_running_var":
            draws = np.abs(draws)
        out = e.data.astype(np.float64).copy()
        out[select] = draws[select]
        new[e.name] = out.astype(np.float32)
    return new


@dataclass(frozen=True)
class SweepItem:
    seed: int
    plan: PerturbationPlan
    checkpoint: Checkpoint


def sweep(base: Checkpoint, plan_template: PerturbationPlan, seeds: range | list[int]) -> list[SweepItem]:
    """One derived checkpoint per seed; each item carries its full plan."""
    seeds = list(seeds)
    if not seeds:
        raise PlanError("seed sweep needs a non-empty range")
    items = []
    for s in seeds:
        plan = replace(plan_template, seed=s)
        items.append(SweepItem(seed=s, plan=plan, checkpoint=apply_plan(base, plan)))
    return items
