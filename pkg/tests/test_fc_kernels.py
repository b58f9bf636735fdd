"""Tests for the fully-connected NNGP/NTK recursions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nke.duals import (
    abrelu_fit_normalized_gaussian,
    catalog_lookup,
    derivative_dual_numeric,
    normalize_dual,
)
from nke.errors import (
    BadParams,
    NonFiniteKernel,
    ShapeMismatch,
    ZeroNormInput,
)
from nke.fc_kernels import (
    KernelConfig,
    kernel_matrix,
    nngp_homogeneous,
    nngp_ntk_pair,
    ntk_homogeneous,
)


def _pair(rng, dim=6):
    return rng.normal(size=dim), rng.normal(size=dim)


# ---------------------------------------------------------------------------
# frozen examples


def test_depth_one_linear_network(rng):
    x, y = _pair(rng)
    cfg = KernelConfig(1, catalog_lookup("monomial", (1,)))
    nngp, ntk = nngp_ntk_pair(x, y, cfg)
    assert nngp == pytest.approx(x @ y, rel=1e-15)
    assert ntk == pytest.approx(2 * (x @ y), rel=1e-15)


@pytest.mark.parametrize("depth", [1, 2, 3, 4, 5])
def test_normalized_gaussian_diagonal(rng, depth):
    x = rng.normal(size=8)
    cfg = KernelConfig(depth, catalog_lookup("normalized_gaussian"))
    nngp, ntk = nngp_ntk_pair(x, x, cfg)
    assert nngp == pytest.approx(x @ x, rel=1e-14)
    assert ntk == pytest.approx((depth + 1) * (x @ x), rel=1e-14)


def test_closed_form_two_layer_example():
    x = np.array([3.0, 0.0, 0.0])
    y = np.array([0.0, 2.0, 0.0])
    kappa = lambda t: math.exp(t - 1.0)
    got = nngp_homogeneous(x, y, kappa, 2)
    assert got == pytest.approx(6.0 * math.exp(math.exp(-1.0) - 1.0), rel=1e-15)
    assert got == pytest.approx(6.0 * 0.5314636053866157, rel=1e-12)


def test_closed_form_identity_map(rng):
    x, y = _pair(rng)
    assert nngp_homogeneous(x, y, lambda t: t, 1) == pytest.approx(x @ y, rel=1e-14)
    ntk = ntk_homogeneous(x, y, lambda t: t, lambda t: 1.0, 1)
    assert ntk == pytest.approx(2 * (x @ y), rel=1e-14)


@pytest.mark.parametrize("depth", [1, 2, 4, 7])
def test_closed_form_aligned_inputs(depth):
    x = np.array([0.6, -0.8, 1.1])
    dual = catalog_lookup("normalized_gaussian")
    kp = lambda t: float(dual.deriv_eval(1.0, 1.0, t))
    ntk = ntk_homogeneous(x, x, dual.kappa, kp, depth)
    assert ntk == pytest.approx((depth + 1) * (x @ x), rel=1e-13)


# ---------------------------------------------------------------------------
# depth-one equivalence with the dual itself


@pytest.mark.parametrize("name,params", [("relu", ()), ("erf", ()), ("gelu", ()), ("gaussian", (1.0,))])
def test_depth_one_matches_dual(rng, name, params):
    dual = catalog_lookup(name, params)
    x, y = _pair(rng)
    a, b = np.linalg.norm(x), np.linalg.norm(y)
    c = float(np.clip((x @ y) / math.sqrt((x @ x) * (y @ y)), -1.0, 1.0))
    nngp, ntk = nngp_ntk_pair(x, y, KernelConfig(1, dual))
    assert nngp == float(dual.eval(a, b, c))
    assert ntk == pytest.approx((x @ y) * float(dual.deriv_eval(a, b, c)) + nngp, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    vals=st.lists(st.floats(-2.0, 2.0), min_size=8, max_size=8),
)
def test_depth_one_matches_dual_property(vals):
    x = np.asarray(vals[:4])
    y = np.asarray(vals[4:])
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(y) < 1e-3:
        return
    dual = catalog_lookup("erf")
    a, b = np.linalg.norm(x), np.linalg.norm(y)
    c = float(np.clip((x @ y) / math.sqrt((x @ x) * (y @ y)), -1.0, 1.0))
    nngp, _ = nngp_ntk_pair(x, y, KernelConfig(1, dual))
    assert nngp == float(dual.eval(a, b, c))


# ---------------------------------------------------------------------------
# homogeneous duals: recursion vs closed form


def _homogeneous_cases():
    neg, pos = abrelu_fit_normalized_gaussian()
    return [
        ("abs", catalog_lookup("abs")),
        ("linear", catalog_lookup("monomial", (1,))),
        ("normalized_gaussian", catalog_lookup("normalized_gaussian")),
        ("fitted_abrelu", catalog_lookup("abrelu", (neg, pos))),
        ("normalized_relu", normalize_dual(catalog_lookup("relu"))),
        ("normalized_abrelu", normalize_dual(catalog_lookup("abrelu", (-0.4, 1.2)))),
    ]


@pytest.mark.parametrize("label,dual", _homogeneous_cases(), ids=lambda v: v if isinstance(v, str) else "")
@pytest.mark.parametrize("depth", [1, 2, 3, 5])
def test_recursion_matches_closed_form(rng, label, dual, depth):
    assert dual.is_homogeneous and dual.kappa is not None
    kp = lambda t: float(dual.deriv_eval(1.0, 1.0, t))
    cfg = KernelConfig(depth, dual)
    for _ in range(10):
        x, y = _pair(rng)
        nngp, ntk = nngp_ntk_pair(x, y, cfg)
        nngp_c = nngp_homogeneous(x, y, dual.kappa, depth)
        ntk_c = ntk_homogeneous(x, y, dual.kappa, kp, depth)
        assert nngp == pytest.approx(nngp_c, rel=1e-10)
        assert ntk == pytest.approx(ntk_c, rel=1e-10)


def test_closed_form_needs_unit_kappa_at_one(rng):
    # raw relu has kappa(1) = 1/2, so layer variances shrink and the closed
    # form applied to its kappa diverges from the recursion.
    dual = catalog_lookup("relu")
    x, y = _pair(rng)
    nngp, _ = nngp_ntk_pair(x, y, KernelConfig(3, dual))
    closed = nngp_homogeneous(x, y, dual.kappa, 3)
    assert abs(nngp - closed) > 1e-3 * abs(nngp)


# ---------------------------------------------------------------------------
# cosine clamping stays inert on clean inputs


@pytest.mark.parametrize("name", ["relu", "erf", "gelu"])
def test_preclamp_cosine_never_drifts(rng, name):
    dual = catalog_lookup(name)
    n = 10_000
    a2 = np.sum(rng.normal(size=(n, 8)) ** 2, axis=1)
    b2 = np.sum(rng.normal(size=(n, 8)) ** 2, axis=1)
    x = rng.normal(size=(n, 8))
    y = rng.normal(size=(n, 8))
    a2 = np.einsum("ij,ij->i", x, x)
    b2 = np.einsum("ij,ij->i", y, y)
    k = np.einsum("ij,ij->i", x, y)
    worst = 0.0
    for _ in range(3):
        a = np.sqrt(a2)
        b = np.sqrt(b2)
        c_raw = k / (a * b)
        worst = max(worst, float(np.max(np.abs(c_raw)) - 1.0))
        c = np.clip(c_raw, -1.0, 1.0)
        k = np.asarray(dual.eval(a, b, c), dtype=float)
        a2 = np.asarray(dual.eval(a, a, 1.0), dtype=float)
        b2 = np.asarray(dual.eval(b, b, 1.0), dtype=float)
    assert worst <= 1e-9


# ---------------------------------------------------------------------------
# diagonal growth


def _unit_slope_cases():
    # Theta(h) = Theta(h-1) * Kdot + K is nondecreasing on the diagonal when
    # the layer derivative there is at least 1 (and K >= 0); these duals have
    # deriv_eval(a, a, 1) = 1 identically.
    return [
        ("abs", catalog_lookup("abs")),
        ("normalized_relu", normalize_dual(catalog_lookup("relu"))),
        ("normalized_gaussian", catalog_lookup("normalized_gaussian")),
    ]


@pytest.mark.parametrize("label,dual", _unit_slope_cases(), ids=lambda v: v if isinstance(v, str) else "")
def test_diagonal_ntk_nondecreasing_in_depth(rng, label, dual):
    x = rng.normal(size=5)
    values = [nngp_ntk_pair(x, x, KernelConfig(L, dual))[1] for L in range(1, 7)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# kernel_matrix


def test_matrix_matches_pairs(rng):
    X = rng.normal(size=(6, 4))
    cfg = KernelConfig(3, catalog_lookup("relu"))
    for which, pick in (("nngp", 0), ("ntk", 1)):
        got = kernel_matrix(X, cfg, which)
        assert got.n == 6
        want = np.array(
            [[nngp_ntk_pair(X[i], X[j], cfg)[pick] for j in range(6)] for i in range(6)]
        )
        np.testing.assert_allclose(got.entries, want, rtol=1e-12, atol=1e-14)


def test_matrix_symmetric_and_psd(rng):
    X = rng.normal(size=(8, 5))
    cfg = KernelConfig(3, catalog_lookup("relu"))
    K = kernel_matrix(X, cfg, "ntk").entries
    assert np.max(np.abs(K - K.T)) <= 1e-12
    eigs = np.linalg.eigvalsh(K)
    assert eigs.min() >= -1e-8 * np.trace(K)


def test_matrix_psd_for_smooth_dual(rng):
    X = rng.normal(size=(8, 5))
    K = kernel_matrix(X, KernelConfig(2, catalog_lookup("erf")), "nngp").entries
    eigs = np.linalg.eigvalsh(K)
    assert eigs.min() >= -1e-8 * np.trace(K)


def test_matrix_duplicated_rows_are_identical(rng):
    X = rng.normal(size=(5, 4))
    X = np.vstack([X, X[1]])
    K = kernel_matrix(X, KernelConfig(2, catalog_lookup("relu")), "ntk").entries
    np.testing.assert_array_equal(K[1], K[5])
    np.testing.assert_array_equal(K[:, 1], K[:, 5])


def test_matrix_single_point(rng):
    x = rng.normal(size=4)
    cfg = KernelConfig(2, catalog_lookup("relu"))
    K = kernel_matrix(x[None, :], cfg, "ntk")
    assert K.entries.shape == (1, 1)
    assert K.entries[0, 0] == pytest.approx(nngp_ntk_pair(x, x, cfg)[1], rel=1e-14)


def test_matrix_thread_count_does_not_change_output(rng, monkeypatch):
    X = rng.normal(size=(7, 4))
    cfg = KernelConfig(3, catalog_lookup("erf"))
    base = kernel_matrix(X, cfg, "ntk").entries
    monkeypatch.setenv("NKE_THREADS", "3")
    threaded = kernel_matrix(X, cfg, "ntk").entries
    np.testing.assert_array_equal(base, threaded)


# ---------------------------------------------------------------------------
# numeric derivative fallback


def test_numeric_derivative_fallback(rng):
    import dataclasses

    dual = catalog_lookup("erf")
    stripped = dataclasses.replace(dual, deriv_eval=None)
    x, y = _pair(rng)
    cfg_full = KernelConfig(2, dual)
    cfg_numeric = KernelConfig(2, stripped)
    nngp_f, ntk_f = nngp_ntk_pair(x, y, cfg_full)
    nngp_n, ntk_n = nngp_ntk_pair(x, y, cfg_numeric)
    assert nngp_n == nngp_f
    assert ntk_n == pytest.approx(ntk_f, rel=1e-8)
    # the numeric path feeds the matrix builder too
    X = np.stack([x, y])
    Kf = kernel_matrix(X, cfg_full, "ntk").entries
    Kn = kernel_matrix(X, cfg_numeric, "ntk").entries
    np.testing.assert_allclose(Kn, Kf, rtol=1e-8)


def test_fallback_agrees_with_direct_numeric():
    dual = catalog_lookup("gelu")
    want = derivative_dual_numeric(dual, 1.3, 0.7, 0.4)
    assert want == pytest.approx(float(dual.deriv_eval(1.3, 0.7, 0.4)), rel=1e-6)


# ---------------------------------------------------------------------------
# validation and failure modes


def test_zero_norm_pair_rejected(rng):
    x = rng.normal(size=4)
    with pytest.raises(ZeroNormInput):
        nngp_ntk_pair(x, np.zeros(4), KernelConfig(1, catalog_lookup("relu")))
    with pytest.raises(ZeroNormInput):
        nngp_ntk_pair(np.zeros(4), x, KernelConfig(1, catalog_lookup("relu")))


def test_zero_norm_row_reported_with_index(rng):
    X = rng.normal(size=(4, 3))
    X[2] = 0.0
    with pytest.raises(ZeroNormInput, match="row 2"):
        kernel_matrix(X, KernelConfig(1, catalog_lookup("relu")), "ntk")


def test_divergent_recursion_raises():
    dual = catalog_lookup("exponential", (1.0,))
    x = np.full(4, 3.0)
    with np.errstate(over="ignore"):
        with pytest.raises(NonFiniteKernel):
            nngp_ntk_pair(x, x, KernelConfig(4, dual))
        with pytest.raises(NonFiniteKernel):
            kernel_matrix(np.stack([x, 0.9 * x]), KernelConfig(4, dual), "ntk")


def test_shape_validation(rng):
    cfg = KernelConfig(1, catalog_lookup("relu"))
    with pytest.raises(ShapeMismatch):
        nngp_ntk_pair(rng.normal(size=(2, 2)), rng.normal(size=4), cfg)
    with pytest.raises(ShapeMismatch):
        nngp_ntk_pair(rng.normal(size=3), rng.normal(size=4), cfg)
    with pytest.raises(ShapeMismatch):
        kernel_matrix(rng.normal(size=5), cfg, "ntk")
    with pytest.raises(BadParams):
        kernel_matrix(rng.normal(size=(3, 2)), cfg, "cntk")
    with pytest.raises(BadParams):
        nngp_ntk_pair(np.array([1.0, np.nan]), np.ones(2), cfg)


def test_config_validation():
    dual = catalog_lookup("relu")
    with pytest.raises(BadParams):
        KernelConfig(0, dual)
    with pytest.raises(BadParams):
        KernelConfig(-2, dual)
    with pytest.raises(BadParams):
        nngp_homogeneous(np.ones(2), np.ones(2), lambda t: t, 0)
    with pytest.raises(BadParams):
        ntk_homogeneous(np.ones(2), np.ones(2), lambda t: t, lambda t: 1.0, 0)
