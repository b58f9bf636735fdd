"""Tests for the SRHT and tensor-power sketches."""

import math

import numpy as np
import pytest

from nke.errors import BadParams, DimensionMismatch
from nke.polysketch import (
    PolySketchTree,
    polysketch_power,
    polysketch_tensor,
    polysketch_tree,
    srht_apply,
    srht_instance,
    tensor_srht_apply,
    tensor_srht_instance,
)


# ---------------------------------------------------------------------------
# SRHT construction and determinism


def test_instance_fields_are_valid():
    s = srht_instance(24, 64, 123)
    assert s.signs.shape == (32,)
    assert set(np.unique(s.signs)) <= {-1.0, 1.0}
    assert s.sample_indices.shape == (64,)
    assert s.sample_indices.min() >= 0 and s.sample_indices.max() < 32
    assert s.seed == 123


def test_instance_deterministic_given_seed():
    a = srht_instance(10, 20, 7)
    b = srht_instance(10, 20, 7)
    np.testing.assert_array_equal(a.signs, b.signs)
    np.testing.assert_array_equal(a.sample_indices, b.sample_indices)
    c = srht_instance(10, 20, 8)
    assert not (
        np.array_equal(a.signs, c.signs)
        and np.array_equal(a.sample_indices, c.sample_indices)
    )


def test_instance_validation():
    with pytest.raises(BadParams):
        srht_instance(0, 4, 1)
    with pytest.raises(BadParams):
        srht_instance(4, 0, 1)
    with pytest.raises(BadParams):
        srht_instance(4, 4, -1)
    with pytest.raises(BadParams):
        srht_instance(4, 4, 1.5)


# ---------------------------------------------------------------------------
# SRHT application


def test_zero_maps_to_zero():
    s = srht_instance(12, 8, 0)
    np.testing.assert_array_equal(srht_apply(s, np.zeros(12)), np.zeros(8))


def test_scaling_is_exact_for_powers_of_two(rng):
    s = srht_instance(12, 8, 0)
    x = rng.normal(size=12)
    np.testing.assert_array_equal(srht_apply(s, 2.0 * x), 2.0 * srht_apply(s, x))


def test_linearity(rng):
    s = srht_instance(12, 8, 5)
    x, y = rng.normal(size=12), rng.normal(size=12)
    lhs = srht_apply(s, 1.7 * x - 0.3 * y)
    rhs = 1.7 * srht_apply(s, x) - 0.3 * srht_apply(s, y)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_norm_unbiased_over_seeds(rng):
    x = rng.normal(size=24)
    vals = [
        float(np.sum(srht_apply(srht_instance(24, 64, seed), x) ** 2))
        for seed in range(500)
    ]
    assert np.mean(vals) == pytest.approx(x @ x, rel=0.05)


def test_batched_apply_matches_rows(rng):
    s = srht_instance(10, 16, 3)
    X = rng.normal(size=(4, 10))
    np.testing.assert_array_equal(
        srht_apply(s, X), np.stack([srht_apply(s, X[i]) for i in range(4)])
    )


def test_apply_rejects_wrong_length(rng):
    s = srht_instance(10, 16, 3)
    with pytest.raises(DimensionMismatch):
        srht_apply(s, rng.normal(size=11))


# ---------------------------------------------------------------------------
# TensorSRHT


def test_tensor_srht_bilinear(rng):
    t = tensor_srht_instance(16, 32, 9)
    u, v, w = (rng.normal(size=16) for _ in range(3))
    lhs = tensor_srht_apply(t, 2.0 * u, v)
    np.testing.assert_array_equal(lhs, 2.0 * tensor_srht_apply(t, u, v))
    sum_right = tensor_srht_apply(t, u, v + w)
    np.testing.assert_allclose(
        sum_right,
        tensor_srht_apply(t, u, v) + tensor_srht_apply(t, u, w),
        rtol=1e-12,
        atol=1e-14,
    )


def test_tensor_srht_second_moment(rng):
    u = rng.normal(size=16)
    v = rng.normal(size=16)
    target = (u @ u) * (v @ v)
    vals = [
        float(np.sum(tensor_srht_apply(tensor_srht_instance(16, 128, s), u, v) ** 2))
        for s in range(400)
    ]
    assert np.mean(vals) == pytest.approx(target, rel=0.05)


def test_tensor_srht_shape_checks(rng):
    t = tensor_srht_instance(8, 16, 0)
    with pytest.raises(DimensionMismatch):
        tensor_srht_apply(t, rng.normal(size=8), rng.normal(size=7))


# ---------------------------------------------------------------------------
# sketch tree structure


def test_tree_shape_and_subseeds():
    t = polysketch_tree(12, 32, 5, 77)
    assert len(t.leaves) == 8
    assert tuple(len(level) for level in t.levels) == (4, 2, 1)
    seeds = [leaf.seed for leaf in t.leaves] + [
        node.seed for level in t.levels for node in level
    ]
    assert len(set(seeds)) == len(seeds)
    again = polysketch_tree(12, 32, 5, 77)
    assert [leaf.seed for leaf in again.leaves] == [leaf.seed for leaf in t.leaves]


def test_tree_validation():
    with pytest.raises(BadParams):
        polysketch_tree(4, 8, 0, 1)
    with pytest.raises(BadParams):
        polysketch_tree(0, 8, 2, 1)
    with pytest.raises(BadParams):
        polysketch_tree(4, 8, 2, -3)


def test_degree_one_tree_is_a_plain_srht(rng):
    t = polysketch_tree(12, 32, 1, 4)
    x = rng.normal(size=12)
    np.testing.assert_array_equal(polysketch_tensor(t, [x]), srht_apply(t.leaves[0], x))


# ---------------------------------------------------------------------------
# tensor sketches: statistics


def test_degree_two_inner_product_concentrates(rng):
    x = rng.normal(size=32)
    y = rng.normal(size=32)
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    target = (x @ y) ** 2
    stds = []
    for m in (256, 1024, 4096):
        errs = []
        for seed in range(150):
            t = polysketch_tree(32, m, 2, 1000 + seed)
            u = polysketch_tensor(t, [x, x])
            v = polysketch_tensor(t, [y, y])
            errs.append(float(u @ v) - target)
        stds.append(np.std(errs))
    slope = np.polyfit(np.log([256.0, 1024.0, 4096.0]), np.log(stds), 1)[0]
    assert -0.65 <= slope <= -0.35


@pytest.mark.parametrize("degree", [2, 3, 4])
def test_power_second_moment_unbiased(rng, degree):
    x = rng.normal(size=16)
    target = (x @ x) ** degree
    norms = [
        float(np.sum(polysketch_power(polysketch_tree(16, 1024, degree, s), x, degree) ** 2))
        for s in range(1000)
    ]
    assert np.mean(norms) == pytest.approx(target, rel=0.05)


def test_basis_slot_padding_preserves_norm(rng):
    # all slots the first basis vector: the sketched tensor has unit norm on
    # average, and padding shorter inputs multiplies by the same e1 slots.
    e1 = np.zeros(8)
    e1[0] = 1.0
    norms = [
        float(
            np.sum(polysketch_tensor(polysketch_tree(8, 256, 3, s), [e1, e1, e1]) ** 2)
        )
        for s in range(500)
    ]
    assert np.mean(norms) == pytest.approx(1.0, rel=0.05)


def test_padded_slots_match_explicit_basis(rng):
    t = polysketch_tree(8, 64, 4, 3)
    x = rng.normal(size=8)
    y = rng.normal(size=8)
    e1 = np.zeros(8)
    e1[0] = 1.0
    np.testing.assert_array_equal(
        polysketch_tensor(t, [x, y]), polysketch_tensor(t, [x, y, e1, e1])
    )


def test_degree_three_inner_products(rng):
    x = rng.normal(size=32)
    y = rng.normal(size=32)
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    target = (x @ y) ** 3
    hits = 0
    trials = 150
    for seed in range(trials):
        t = polysketch_tree(32, 4096, 3, 9000 + seed)
        u = polysketch_power(t, x, 3)
        v = polysketch_power(t, y, 3)
        hits += abs(float(u @ v) - target) <= 0.2
    assert hits / trials >= 0.9


def test_multilinearity_in_one_slot(rng):
    t = polysketch_tree(8, 64, 2, 21)
    x, y = rng.normal(size=8), rng.normal(size=8)
    np.testing.assert_array_equal(
        polysketch_tensor(t, [2.0 * x, y]), 2.0 * polysketch_tensor(t, [x, y])
    )
    np.testing.assert_allclose(
        polysketch_tensor(t, [1.3 * x, y]),
        1.3 * polysketch_tensor(t, [x, y]),
        rtol=1e-12,
        atol=1e-14,
    )


# ---------------------------------------------------------------------------
# power sketches: conventions and shapes


def test_power_zero_is_fixed_unit_vector(rng):
    t = polysketch_tree(8, 16, 2, 1)
    z = polysketch_power(t, rng.normal(size=8), 0)
    want = np.zeros(16)
    want[0] = 1.0
    np.testing.assert_array_equal(z, want)
    Z = polysketch_power(t, rng.normal(size=(3, 8)), 0)
    np.testing.assert_array_equal(Z, np.tile(want, (3, 1)))


def test_power_one_norm_statistics(rng):
    x = rng.normal(size=16)
    vals = [
        float(np.sum(polysketch_power(polysketch_tree(16, 128, 2, s), x, 1) ** 2))
        for s in range(400)
    ]
    assert np.mean(vals) == pytest.approx(x @ x, rel=0.05)


def test_power_batched_matches_rows(rng):
    t = polysketch_tree(12, 64, 3, 42)
    X = rng.normal(size=(5, 12))
    np.testing.assert_array_equal(
        polysketch_power(t, X, 3),
        np.stack([polysketch_power(t, X[i], 3) for i in range(5)]),
    )


def test_power_validation(rng):
    t = polysketch_tree(8, 16, 2, 1)
    with pytest.raises(DimensionMismatch):
        polysketch_power(t, rng.normal(size=8), 3)
    with pytest.raises(DimensionMismatch):
        polysketch_power(t, rng.normal(size=7), 2)
    with pytest.raises(BadParams):
        polysketch_power(t, rng.normal(size=8), -1)
    with pytest.raises(DimensionMismatch):
        polysketch_tensor(t, [])
    with pytest.raises(DimensionMismatch):
        polysketch_tensor(t, [rng.normal(size=8)] * 3)


def test_apply_is_reproducible(rng):
    t = polysketch_tree(12, 64, 3, 42)
    X = rng.normal(size=(4, 12))
    first = polysketch_power(t, X, 3)
    second = polysketch_power(t, X, 3)
    np.testing.assert_array_equal(first, second)
    rebuilt = polysketch_tree(12, 64, 3, 42)
    np.testing.assert_array_equal(polysketch_power(rebuilt, X, 3), first)


def test_powers_batch_matches_single_power(rng):
    from nke.polysketch import polysketch_powers

    t = polysketch_tree(10, 32, 5, 31)
    X = rng.normal(size=(6, 10))
    out = polysketch_powers(t, X, [0, 2, 5])
    assert sorted(out) == [0, 2, 5]
    for ell in (0, 2, 5):
        np.testing.assert_array_equal(out[ell], polysketch_power(t, X, ell))


def test_powers_validation(rng):
    from nke.polysketch import polysketch_powers

    t = polysketch_tree(8, 16, 2, 1)
    with pytest.raises(DimensionMismatch):
        polysketch_powers(t, rng.normal(size=8), [1])
    with pytest.raises(DimensionMismatch):
        polysketch_powers(t, rng.normal(size=(3, 8)), [3])
    with pytest.raises(BadParams):
        polysketch_powers(t, rng.normal(size=(3, 8)), [-1])
