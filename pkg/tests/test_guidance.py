import numpy as np
import pytest

from numina.errors import DimMismatch, EmptyReference, MissingScores
from numina.guidance import (
    MODE_BOOST,
    MODE_OVERWRITE,
    MODE_SUPPRESS,
    DecaySchedule,
    apply_guidance,
    build_guidance,
    delta_schedule,
    mean_ref_score,
)
from numina.io import AttentionBundle, BundleKind
from numina.layout import Layout
from numina.prompt import CountEntry, CountSpec
from numina.refine import refine_to_count

from conftest import softmax_rows


def test_schedule_examples():
    assert delta_schedule(0, 50, 0.6) == 1.0
    assert delta_schedule(15, 50, 0.6) == pytest.approx(0.5)
    assert delta_schedule(45, 50, 0.6) == 0.0
    assert delta_schedule(30, 50, 0.6) == 0.0


def test_schedule_monotone_over_configs():
    rng = np.random.default_rng(2)
    for _ in range(10):
        total = int(rng.integers(2, 120))
        fraction = float(rng.uniform(0.05, 1.0))
        sched = DecaySchedule(total_steps=total, fraction=fraction)
        values = [sched.value(t) for t in range(total)]
        assert values[0] == 1.0
        assert all(a >= b for a, b in zip(values, values[1:]))
        window = fraction * total
        assert all(v == 0.0 for t, v in enumerate(values) if t >= window)


def test_schedule_bounds():
    sched = DecaySchedule(total_steps=10, fraction=0.5)
    with pytest.raises(ValueError):
        sched.value(-1)
    with pytest.raises(ValueError):
        sched.value(10)
    with pytest.raises(ValueError):
        DecaySchedule(total_steps=0, fraction=0.5)
    with pytest.raises(ValueError):
        DecaySchedule(total_steps=10, fraction=0.0)


def presoftmax_bundle(values, tokens=("<s>", "cats")):
    f, h, n, l = values.shape
    side = int(np.sqrt(n))
    return AttentionBundle(kind=BundleKind.PRE_SOFTMAX, frames=f, heads=h,
                           grid_h=side, grid_w=side, text_len=l,
                           data=values.astype(np.float32), tokens=list(tokens))


def test_mean_ref_score():
    data = np.full((1, 2, 16, 2), 0.7, dtype=np.float32)
    b = presoftmax_bundle(data)
    assert mean_ref_score(b, np.array([0, 5, 9]), 0, 0, 1) == pytest.approx(0.7)
    data2 = data.copy()
    data2[0, 0, 0, 1] = 1.0
    data2[0, 0, 1, 1] = 2.0
    data2[0, 0, 2, 1] = 3.0
    b2 = presoftmax_bundle(data2)
    assert mean_ref_score(b2, np.array([0, 1, 2]), 0, 0, 1) == pytest.approx(2.0)
    assert mean_ref_score(b2, np.array([2]), 0, 0, 1) == pytest.approx(3.0)
    with pytest.raises(EmptyReference):
        mean_ref_score(b2, np.array([], dtype=int), 0, 0, 1)


def removal_only_refined():
    lay = Layout.empty(1, 8, 8)
    lid = lay.register("cats")
    lay.grids[0][1:3, 1:3] = lid
    lay.grids[0][5:7, 5:7] = lid
    spec = CountSpec(entries=[CountEntry(noun="cats", token_index=1, count=1)])
    return refine_to_count(lay, spec), spec


def test_build_guidance_removal_only():
    refined, spec = removal_only_refined()
    field = build_guidance(refined, spec)
    slot = field.slots[0]
    assert (slot.mode == MODE_SUPPRESS).sum() == 4
    assert not np.isin(slot.mode, [MODE_BOOST, MODE_OVERWRITE]).any()
    rem = refined.delta_rem["cats"][0]
    assert np.array_equal(slot.mode[0] == MODE_SUPPRESS, rem)
    assert (slot.base[0][rem] == np.float32(-1e4)).all()


def addition_refined(k=1, gh=12):
    lay = Layout.empty(1, gh, gh)
    lay.register("cats")
    spec = CountSpec(entries=[CountEntry(noun="cats", token_index=1, count=k)])
    return refine_to_count(lay, spec, radius=1), spec


def test_build_guidance_circle_boost():
    refined, spec = addition_refined(k=1)
    field = build_guidance(refined, spec, boost=0.8)
    slot = field.slots[0]
    boosted = slot.mode == MODE_BOOST
    assert boosted.sum() == 5
    assert (slot.base[boosted] == np.float32(0.8)).all()


def test_build_guidance_copied_overwrite():
    lay = Layout.empty(1, 12, 12)
    lid = lay.register("cats")
    lay.grids[0][2:4, 2:4] = lid
    spec = CountSpec(entries=[CountEntry(noun="cats", token_index=1, count=2)])
    refined = refine_to_count(lay, spec)
    data = np.full((1, 2, 144, 2), 0.7, dtype=np.float32)
    field = build_guidance(refined, spec, scores=presoftmax_bundle(data))
    slot = field.slots[0]
    over = slot.mode == MODE_OVERWRITE
    assert over.sum() == 4
    assert (slot.base[over] == np.float32(0.7)).all()


def test_build_guidance_missing_scores():
    lay = Layout.empty(1, 12, 12)
    lid = lay.register("cats")
    lay.grids[0][2:4, 2:4] = lid
    spec = CountSpec(entries=[CountEntry(noun="cats", token_index=1, count=2)])
    refined = refine_to_count(lay, spec)
    with pytest.raises(MissingScores):
        build_guidance(refined, spec, scores=None)


def test_apply_guidance_empty_field_is_plain_softmax():
    refined, spec = removal_only_refined()
    field = build_guidance(refined, spec)
    for slot in field.slots:
        slot.mode[:] = 0
    rng = np.random.default_rng(4)
    s = rng.normal(0, 2, size=(64, 3))
    out = apply_guidance(s, field, 0, 0)
    want = softmax_rows(s)
    assert np.array_equal(out, want)


def test_apply_guidance_suppression_kills_mass():
    refined, spec = removal_only_refined()
    field = build_guidance(refined, spec, neg_const=-1e4)
    rng = np.random.default_rng(5)
    s = rng.uniform(-20, 20, size=(64, 3))
    out = apply_guidance(s, field, 0, 0)
    rem = refined.delta_rem["cats"][0].ravel()
    assert out[rem, 1].max() < 1e-6
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)
    assert (out >= 0).all()


def test_apply_guidance_locality_bitwise():
    refined, spec = removal_only_refined()
    field = build_guidance(refined, spec)
    rng = np.random.default_rng(6)
    s = rng.normal(0, 3, size=(64, 4))
    out = apply_guidance(s, field, 0, 0)
    want = softmax_rows(s)
    touched = refined.delta_rem["cats"][0].ravel()
    assert np.array_equal(out[~touched], want[~touched])
    assert not np.array_equal(out[touched], want[touched])


def test_apply_guidance_zero_delta_unguided():
    refined, spec = addition_refined(k=1)
    field = build_guidance(refined, spec, boost=0.8,
                           schedule=DecaySchedule(total_steps=50, fraction=0.6))
    rng = np.random.default_rng(7)
    s = rng.normal(size=(144, 2))
    out_late = apply_guidance(s, field, 0, 45)   # delta == 0
    assert np.array_equal(out_late, softmax_rows(s))
    out_early = apply_guidance(s, field, 0, 0)
    assert not np.array_equal(out_early, softmax_rows(s))


def test_apply_guidance_mass_monotone_in_boost():
    rng = np.random.default_rng(8)
    s = rng.normal(size=(144, 2))
    masses = []
    for k in (0.2, 0.8, 2.0):
        refined, spec = addition_refined(k=1)
        field = build_guidance(refined, spec, boost=k)
        out = apply_guidance(s, field, 0, 0)
        add = refined.delta_add["cats"][0].ravel()
        masses.append(out[add, 1].sum())
    assert masses[0] < masses[1] < masses[2]


def test_apply_guidance_dim_mismatch():
    refined, spec = removal_only_refined()
    field = build_guidance(refined, spec)
    with pytest.raises(DimMismatch):
        apply_guidance(np.zeros((10, 3)), field, 0, 0)
    with pytest.raises(DimMismatch):
        apply_guidance(np.zeros((64, 1)), field, 0, 0)  # token_index outside L
