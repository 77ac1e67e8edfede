import numpy as np
import pytest

from serialpoint.patch import (
    KINDS,
    Interaction,
    PatchPlan,
    dilated_plan,
    pad_and_group,
    plan_for_block,
    select_pattern,
    shifted_patch_plan,
    shuffle_permutation,
)
from serialpoint.serialize import SerializationConfig, serialize_all

from helpers import philox, uniform_cloud


def assert_plan_invariants(plan, seq):
    values = sorted(np.asarray(seq).tolist())
    m = len(plan.padded)
    assert m % plan.patch_size == 0
    assert len(plan.borrow_mask) == m
    assert sorted(set(plan.padded.tolist())) == values
    fresh = plan.padded[~plan.borrow_mask]
    assert sorted(fresh.tolist()) == values


def seq_of(n, seed=0):
    # arbitrary distinct labels so tests prove plans are index-transparent
    return philox(seed).permutation(1000)[:n].astype(np.int64)


def test_exact_division_has_no_borrows():
    a = seq_of(8)
    plan = pad_and_group(a, 4)
    assert plan.num_patches == 2
    assert not plan.borrow_mask.any()
    assert np.array_equal(plan.padded, a)


def test_final_patch_borrows_backwards():
    a = seq_of(10)
    plan = pad_and_group(a, 4)
    assert plan.num_patches == 3
    want = np.concatenate([a[0:4], a[4:8], a[6:10]])
    assert np.array_equal(plan.padded, want)
    # only the two slots repeating a6, a7 are flagged
    assert plan.borrow_mask.tolist() == [False] * 8 + [True, True, False, False]
    assert_plan_invariants(plan, a)


def test_tiny_cloud_left_pads_with_first_entry():
    a = seq_of(2)
    plan = pad_and_group(a, 4)
    assert np.array_equal(plan.padded, np.array([a[0], a[0], a[0], a[1]]))
    assert plan.borrow_mask.tolist() == [True, True, False, False]
    assert_plan_invariants(plan, a)


def test_dilated_examples():
    a = seq_of(8)
    plan = dilated_plan(a, 4, 2)
    assert np.array_equal(plan.patches(), np.array([a[[0, 2, 4, 6]], a[[1, 3, 5, 7]]]))
    plan = dilated_plan(a, 2, 4)
    assert np.array_equal(plan.patches(), np.array([a[[0, 4]], a[[1, 5]], a[[2, 6]], a[[3, 7]]]))
    assert np.array_equal(dilated_plan(a, 4, 1).padded, pad_and_group(a, 4).padded)


def test_shifted_examples():
    a = seq_of(8)
    plan = shifted_patch_plan(a, 4)
    assert np.array_equal(plan.patches(), np.array([a[[2, 3, 4, 5]], a[[6, 7, 0, 1]]]))
    b = seq_of(4)
    plan = shifted_patch_plan(b, 2)
    assert np.array_equal(plan.patches(), np.array([b[[1, 2]], b[[3, 0]]]))
    with pytest.raises(ValueError):
        shifted_patch_plan(a, 1)


def test_every_interior_boundary_is_straddled_by_a_shifted_patch():
    n, s = 64, 8
    plan = shifted_patch_plan(np.arange(n), s)
    patches = [set(p) for p in plan.patches().tolist()]
    for boundary in range(s, n, s):
        assert any({boundary - 1, boundary} <= p for p in patches)


def test_dilation_partitions_into_residue_runs():
    n, s, d = 32, 4, 2
    plan = dilated_plan(np.arange(n), s, d)
    assert sorted(plan.padded.tolist()) == list(range(n))
    for row in plan.patches():
        assert len(set(int(p) % d for p in row)) == 1


def test_dilated_patches_spread_wider_than_plain():
    cfg = SerializationConfig(1 / 32, 6, patterns=("H",))
    for seed in range(5):
        cloud = uniform_cloud(seed, n=1024)
        (order,) = serialize_all(cloud, cfg)

        def mean_diameter(plan):
            pts = cloud.positions[plan.patches()]
            gaps = np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=-1)
            return gaps.max(axis=(1, 2)).mean()

        assert mean_diameter(dilated_plan(order, 16, 4)) > mean_diameter(pad_and_group(order, 16))


def test_coverage_and_divisibility_sweep():
    interactions = [Interaction(k) for k in KINDS]
    fake_orders = []

    class Stub:
        def __init__(self, pattern, seq):
            self.pattern = pattern
            self.order = seq

    for n in range(1, 65):
        seq = seq_of(n, seed=n)
        orders = [Stub(p, seq) for p in ("Z", "TZ", "H", "TH")]
        for s in (1, 2, 4, 8, 16):
            for inter in interactions:
                for block in (0, 1, 2, 3):
                    _, plan = plan_for_block(orders, block, s, inter)
                    assert_plan_invariants(plan, seq)


def test_shift_order_cycles_patterns():
    pats = ["Z", "TZ", "H", "TH"]
    inter = Interaction("shift-order")
    got = [select_pattern(i, pats, inter) for i in range(6)]
    assert got == ["Z", "TZ", "H", "TH", "Z", "TZ"]


def test_fixed_order_kinds_pin_first_pattern():
    pats = ["H", "Z"]
    for kind in ("shift-dilation", "shift-patch"):
        inter = Interaction(kind)
        assert [select_pattern(i, pats, inter) for i in range(4)] == ["H"] * 4


def test_shuffle_order_is_deterministic_per_seed():
    pats = ["Z", "TZ", "H", "TH"]
    a = [select_pattern(i, pats, Interaction("shuffle-order", seed=42)) for i in range(8)]
    b = [select_pattern(i, pats, Interaction("shuffle-order", seed=42)) for i in range(8)]
    assert a == b
    assert sorted(a[:4]) == sorted(pats)


def test_shuffle_order_slot_zero_is_uniform_over_seeds():
    counts = np.zeros(4, dtype=int)
    for seed in range(10_000):
        counts[shuffle_permutation(4, seed)[0]] += 1
    freq = counts / 10_000
    assert np.all(np.abs(freq - 0.25) <= 0.02)


def test_interaction_validation():
    with pytest.raises(ValueError):
        Interaction("warp")
    with pytest.raises(ValueError):
        Interaction("shift-dilation", dilation=0)
    with pytest.raises(ValueError):
        pad_and_group(np.arange(4), 0)
    with pytest.raises(ValueError):
        pad_and_group(np.array([], dtype=np.int64), 2)
