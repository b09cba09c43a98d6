from __future__ import annotations

import logging

import numpy as np
import pytest

from weightscape import BlockId
from weightscape.checkpoint import Checkpoint, Entry, compute_stats, diff
from weightscape.errors import PlanError
from weightscape.metrics import stats_match_report
from weightscape.perturb import (
    DEFAULT_KIND_FILTER,
    MaskSpec,
    PerturbationPlan,
    apply_plan,
    masked_substitute,
    perturb_multiplicative,
    randomize_block,
    sweep,
)

ALPHA = 0.35


def _payload(ck: Checkpoint) -> bytes:
    return b"".join(e.data.tobytes() for e in ck.entries)


class TestPlanText:
    def test_roundtrip(self):
        plan = PerturbationPlan(
            mode="block_randomize", seed=9,
            target_blocks=frozenset({BlockId.block(2), BlockId.block(5)}),
        )
        again = PerturbationPlan.from_text(plan.to_text())
        assert again == plan

    def test_mask_roundtrip(self):
        plan = PerturbationPlan(
            mode="masked_substitute", seed=1,
            mask=MaskSpec(pattern="b02.*", fraction=0.5, seed=77),
        )
        assert PerturbationPlan.from_text(plan.to_text()) == plan

    def test_canonical_field_order(self):
        plan = PerturbationPlan(mode="multiplicative", alpha=0.35, seed=3)
        text = plan.to_text()
        assert text.startswith("mode=multiplicative alpha=0.35 seed=3 ")
        assert text.endswith("stats=per_pixel")

    def test_invalid_plans_rejected(self):
        with pytest.raises(PlanError):
            PerturbationPlan(mode="nope", seed=0).validate()
        with pytest.raises(PlanError):
            PerturbationPlan(mode="multiplicative", alpha=-1.0, seed=0).validate()
        with pytest.raises(PlanError):
            PerturbationPlan(mode="block_randomize", seed=0).validate()
        with pytest.raises(PlanError):
            PerturbationPlan.from_text("garbage text")


class TestMultiplicative:
    def test_alpha_zero_is_byte_identical(self, base_unit):
        out = perturb_multiplicative(base_unit, alpha=0.0, seed=123)
        assert _payload(out) == _payload(base_unit)
        assert out.meta["plan"].startswith("mode=multiplicative alpha=0")

    def test_exact_zeros_stay_zero(self, base_unit):
        entries = []
        for e in base_unit.entries:
            data = e.data.copy()
            if e.kind == "conv_kernel":
                data.ravel()[::7] = 0.0
            entries.append(Entry(e.name, e.block, e.kind, data))
        base = Checkpoint(entries=entries, meta=dict(base_unit.meta))
        for seed in (0, 3, 9):
            out = perturb_multiplicative(base, alpha=ALPHA, seed=seed)
            for eb, ep in zip(base.entries, out.entries):
                zb, zp = eb.data == 0, ep.data == 0
                np.testing.assert_array_equal(zb, zp, err_msg=eb.name)

    def test_ratio_statistics(self, base_unit):
        out = perturb_multiplicative(base_unit, alpha=ALPHA, seed=3)
        checked = 0
        for eb, ep in zip(base_unit.entries, out.entries):
            nz = eb.data != 0
            n = int(nz.sum())
            if n < 100_000:
                continue
            ratio = ep.data.astype(np.float64)[nz] / eb.data.astype(np.float64)[nz] - 1.0
            assert abs(ratio.mean()) <= 4 * ALPHA / np.sqrt(n)
            assert abs(ratio.std() - ALPHA) <= 0.01 * ALPHA
            checked += 1
        assert checked >= 1

    def test_sign_flip_or_preserve_never_zero_crossing(self, base_unit):
        out = perturb_multiplicative(base_unit, alpha=ALPHA, seed=1)
        for eb, ep in zip(base_unit.entries, out.entries):
            if eb.kind not in DEFAULT_KIND_FILTER:
                continue
            np.testing.assert_array_equal(eb.data == 0, ep.data == 0, err_msg=eb.name)

    def test_buffers_excluded_by_default(self, base_unit):
        out = perturb_multiplicative(base_unit, alpha=ALPHA, seed=4)
        for eb, ep in zip(base_unit.entries, out.entries):
            if eb.kind in ("bn_running_mean", "bn_running_var"):
                assert eb.data.tobytes() == ep.data.tobytes()

    def test_kind_filter_restricts(self, base_unit):
        out = perturb_multiplicative(
            base_unit, alpha=ALPHA, seed=4, kind_filter=frozenset({"conv_kernel"})
        )
        for eb, ep in zip(base_unit.entries, out.entries):
            same = eb.data.tobytes() == ep.data.tobytes()
            assert same == (eb.kind != "conv_kernel"), eb.name

    def test_diff_fraction_matches_nonzero_fraction(self, base_unit):
        out = perturb_multiplicative(base_unit, alpha=ALPHA, seed=3)
        report = {d.name: d for d in diff(base_unit, out)}
        for e in base_unit.entries:
            if e.kind not in DEFAULT_KIND_FILTER:
                continue
            assert report[e.name].differing == int(np.count_nonzero(e.data)), e.name


class TestRandomizeBlock:
    def test_locality_is_exact(self, base_unit):
        b2 = BlockId.block(2)
        out = randomize_block(base_unit, {b2}, seed=7)
        for eb, ep in zip(base_unit.entries, out.entries):
            if eb.block != b2:
                assert eb.data.tobytes() == ep.data.tobytes(), eb.name

    def test_diff_nonzero_only_on_target(self, base_unit):
        b2 = BlockId.block(2)
        out = randomize_block(base_unit, {b2}, seed=7)
        for d in diff(base_unit, out):
            if d.block != b2:
                assert d.differing == 0, d.name
        assert any(d.differing > 0 and d.block == b2 for d in diff(base_unit, out))

    def test_statistics_match(self, base_unit):
        b2 = BlockId.block(2)
        out = randomize_block(base_unit, {b2}, seed=7)
        stats = compute_stats(base_unit)
        report = stats_match_report(out, stats, {b2}, base=base_unit)
        sized = [r for r in report if r.status in ("pass", "fail")]
        assert sized and all(r.status == "pass" for r in sized)

    def test_running_var_stays_nonnegative(self, base_unit):
        out = randomize_block(base_unit, {BlockId.block(2)}, seed=7)
        for e in out.entries:
            if e.kind == "bn_running_var":
                assert (e.data >= 0).all()

    def test_empty_target_rejected(self, base_unit):
        with pytest.raises(PlanError):
            randomize_block(base_unit, set(), seed=0)

    def test_absent_block_named_in_error(self, base_unit):
        with pytest.raises(PlanError, match="B9"):
            randomize_block(base_unit, {BlockId.block(9)}, seed=0)


class TestMaskedSubstitute:
    def test_fraction_zero_identity(self, base_unit):
        out = masked_substitute(base_unit, MaskSpec("b02.*", 0.0, seed=5), seed=1)
        assert _payload(out) == _payload(base_unit)

    def test_no_match_warns_and_is_identity(self, base_unit, caplog):
        with caplog.at_level(logging.WARNING):
            out = masked_substitute(base_unit, MaskSpec("zzz.*", 0.5, seed=5), seed=1)
        assert _payload(out) == _payload(base_unit)
        assert any("matches no entries" in r.message for r in caplog.records)

    def test_full_fraction_on_block_matches_stats_contract(self, base_unit):
        b2 = BlockId.block(2)
        out = masked_substitute(base_unit, MaskSpec("b02.*", 1.0, seed=5), seed=1)
        stats = compute_stats(base_unit)
        report = stats_match_report(out, stats, {b2}, base=base_unit)
        sized = [r for r in report if r.status in ("pass", "fail")]
        assert sized and all(r.status == "pass" for r in sized)
        # complement untouched
        for eb, ep in zip(base_unit.entries, out.entries):
            if not eb.name.startswith("b02."):
                assert eb.data.tobytes() == ep.data.tobytes()

    def test_half_fraction_selection_count(self, base_unit):
        name = "entry.project.weight"  # 589k elements
        out = masked_substitute(base_unit, MaskSpec(name, 0.5, seed=5), seed=1)
        base_e, out_e = base_unit.entry(name), out.entry(name)
        n = base_e.size
        changed = int(np.count_nonzero(base_e.data != out_e.data))
        assert abs(changed - n / 2) <= 4 * np.sqrt(n * 0.25)

    def test_unselected_elements_bit_identical(self, base_unit):
        name = "entry.project.weight"
        out = masked_substitute(base_unit, MaskSpec(name, 0.3, seed=11), seed=2)
        a, b = base_unit.entry(name).data, out.entry(name).data
        same = a == b
        assert same.any()
        np.testing.assert_array_equal(a[same], b[same])


class TestSweep:
    def test_eleven_seeds(self, base_unit):
        plan = PerturbationPlan(mode="multiplicative", alpha=ALPHA, seed=0)
        items = sweep(base_unit, plan, range(11))
        assert [it.seed for it in items] == list(range(11))
        payloads = {_payload(it.checkpoint) for it in items}
        assert len(payloads) == 11
        names = items[0].checkpoint.names()
        assert all(it.checkpoint.names() == names for it in items)

    def test_single_seed_equals_direct_call(self, base_unit):
        plan = PerturbationPlan(mode="multiplicative", alpha=ALPHA, seed=6)
        [item] = sweep(base_unit, plan, [6])
        direct = perturb_multiplicative(base_unit, ALPHA, 6)
        assert _payload(item.checkpoint) == _payload(direct)

    def test_rerun_bit_identical(self, base_unit):
        plan = PerturbationPlan(mode="multiplicative", alpha=ALPHA, seed=0)
        a = sweep(base_unit, plan, range(3))
        b = sweep(base_unit, plan, range(3))
        for ia, ib in zip(a, b):
            assert _payload(ia.checkpoint) == _payload(ib.checkpoint)

    def test_empty_range_rejected(self, base_unit):
        with pytest.raises(PlanError):
            sweep(base_unit, PerturbationPlan(mode="multiplicative", alpha=0.1, seed=0), [])


class TestSeedStreamIndependence:
    def test_entry_order_does_not_change_draws(self, base_unit):
        permuted = Checkpoint(entries=list(reversed(base_unit.entries)),
                              meta=dict(base_unit.meta))
        a = perturb_multiplicative(base_unit, ALPHA, seed=3)
        b = perturb_multiplicative(permuted, ALPHA, seed=3)
        bt = {e.name: e.data.tobytes() for e in b.entries}
        for e in a.entries:
            assert e.data.tobytes() == bt[e.name], e.name

    def test_randomize_block_order_independent(self, base_unit):
        permuted = Checkpoint(entries=list(reversed(base_unit.entries)),
                              meta=dict(base_unit.meta))
        b2 = BlockId.block(2)
        a = randomize_block(base_unit, {b2}, seed=5)
        b = randomize_block(permuted, {b2}, seed=5)
        bt = {e.name: e.data.tobytes() for e in b.entries}
        for e in a.entries:
            assert e.data.tobytes() == bt[e.name], e.name


class TestProvenanceMeta:
    def test_plan_embedded_and_parses(self, base_unit):
        out = randomize_block(base_unit, {BlockId.block(3)}, seed=2)
        plan = PerturbationPlan.from_text(out.meta["plan"])
        assert plan.mode == "block_randomize"
        assert plan.target_blocks == frozenset({BlockId.block(3)})

    def test_apply_plan_roundtrips_through_text(self, base_unit):
        plan = PerturbationPlan(mode="multiplicative", alpha=0.2, seed=8)
        direct = apply_plan(base_unit, plan)
        via_text = apply_plan(base_unit, PerturbationPlan.from_text(plan.to_text()))
        assert _payload(direct) == _payload(via_text)
