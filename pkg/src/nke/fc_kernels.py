"""Depth-L NNGP and NTK recursions for fully-connected networks.

With K^(0)(x,y) = <x,y>, each layer evaluates the dual activation at the
previous layer's statistics,

    K^(h)(x,y)  = k_sigma(a, b, c),   a = sqrt(K^(h-1)(x,x)),
                                      b = sqrt(K^(h-1)(y,y)),
                                      c = K^(h-1)(x,y) / (a b),

and the tangent kernel accumulates Theta^(h) = Theta^(h-1) * Kdot^(h) + K^(h)
starting from Theta^(0) = <x,y>, where Kdot is the derivative dual k_sigma'.
The recursion runs literally through h = L (the last layer both multiplies by
Kdot and adds its K term).

For homogeneous duals, k(a,b,c) = a*b*kappa(c), the depth-L kernels collapse
to closed forms in the cosine t = <x,y>/(|x||y|):

    K^(L) = |x||y| kappa^oL(t),
    Theta^(L) = |x||y| sum_{h=0}^{L} kappa^oh(t) prod_{i=h}^{L-1} kappa'(kappa^oi(t)),

valid when kappa(1) = 1 (so layer variances stay fixed); normalize the dual
first otherwise.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, NamedTuple, Tuple

import numpy as np

from .duals import DualActivation, derivative_dual_numeric
from .errors import (
    BadParams,
    ShapeMismatch,
    NonFiniteKernel,
    ZeroNormInput,
)

__all__ = [
    "KernelConfig",
    "KernelMatrix",
    "nngp_ntk_pair",
    "nngp_homogeneous",
    "ntk_homogeneous",
    "kernel_matrix",
]

_COS_TOL = 1e-9

# Cosines within a few ulps of +-1 are snapped to the endpoint. Derivative
# duals of kinked activations behave like arccos near c = 1, so the ulp lost
# in v/(sqrt(v) * sqrt(v)) would otherwise shift them by ~1e-9 and make
# duplicated inputs disagree with the true diagonal.
_SNAP = 1.0 - 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class KernelConfig:
    """Network depth and the dual activation driving the layer recursion."""

    depth: int
    dual: DualActivation

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise BadParams(f"depth must be a positive integer, got {self.depth!r}")


class KernelMatrix(NamedTuple):
    """A dense symmetric kernel matrix over n points."""

    n: int
    entries: np.ndarray


def _deriv_evaluator(dual: DualActivation) -> Callable:
    """deriv_eval when the catalog provides it, numeric fallback otherwise.

    The fallback differentiates eval along c pointwise, so it is exact-grade
    for smooth kernels but O(elements) scalar-slow; catalog entries all carry
    closed forms.
    """
    if dual.deriv_eval is not None:
        return dual.deriv_eval
    return np.vectorize(lambda a, b, c: derivative_dual_numeric(dual, float(a), float(b), float(c)))


def _clamped_cosine(k_xy, var_x, var_y):
    c = float(np.clip(k_xy / np.sqrt(var_x * var_y), -1.0, 1.0))
    if abs(c) > _SNAP:
        return math.copysign(1.0, c)
    return c


def _as_point(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ShapeMismatch(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise BadParams(f"{name} contains non-finite entries")
    return v


def nngp_ntk_pair(x, y, cfg: KernelConfig) -> Tuple[float, float]:
    """Exact (NNGP, NTK) values at depth cfg.depth for one input pair."""
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ShapeMismatch(f"x and y dimensions differ: {x.shape} vs {y.shape}")
    var_x = float(x @ x)
    var_y = float(y @ y)
    if var_x == 0.0 or var_y == 0.0:
        raise ZeroNormInput("inputs must have positive norm")
    k_xy = float(x @ y)
    theta = k_xy
    deriv = _deriv_evaluator(cfg.dual)
    identical = bool(np.array_equal(x, y))
    for h in range(cfg.depth):
        a = math.sqrt(var_x)
        b = math.sqrt(var_y)
        c = 1.0 if identical else float(_clamped_cosine(k_xy, var_x, var_y))
        k_new = float(cfg.dual.eval(a, b, c))
        k_dot = float(deriv(a, b, c))
        var_x = float(cfg.dual.eval(a, a, 1.0))
        var_y = float(cfg.dual.eval(b, b, 1.0))
        theta = theta * k_dot + k_new
        k_xy = k_new
        if not (math.isfinite(k_xy) and math.isfinite(theta) and math.isfinite(var_x) and math.isfinite(var_y)):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h + 1}")
        if var_x <= 0.0 or var_y <= 0.0:
            raise NonFiniteKernel(f"kernel variance collapsed at layer {h + 1}")
    return k_xy, theta


def _norms_and_cosine(x, y):
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ShapeMismatch(f"x and y dimensions differ: {x.shape} vs {y.shape}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise ZeroNormInput("inputs must have positive norm")
    t = min(1.0, max(-1.0, float(x @ y) / (nx * ny)))
    if abs(t) > _SNAP:
        t = math.copysign(1.0, t)
    return nx, ny, t


def nngp_homogeneous(x, y, kappa: Callable, L: int) -> float:
    """Closed-form depth-L NNGP |x||y| kappa^oL(cosine) for homogeneous duals.

    Coincides with the recursive kernel only when kappa(1) = 1, since the
    recursion renormalizes by the evolving layer variances.
    """
    L = int(L)
    if L < 1:
        raise BadParams(f"depth must be >= 1, got {L}")
    nx, ny, t = _norms_and_cosine(x, y)
    for _ in range(L):
        t = float(kappa(t))
    return nx * ny * t


def ntk_homogeneous(x, y, kappa: Callable, kappa_prime: Callable, L: int) -> float:
    """Closed-form depth-L NTK for homogeneous duals (kappa(1) = 1 assumed).

    |x||y| sum_{h=0}^{L} kappa^oh(t) prod_{i=h}^{L-1} kappa'(kappa^oi(t)),
    with kappa^o0(t) = t and the empty product equal to 1.
    """
    L = int(L)
    if L < 1:
        raise BadParams(f"depth must be >= 1, got {L}")
    nx, ny, t = _norms_and_cosine(x, y)
    composed = [t]
    for _ in range(L):
        composed.append(float(kappa(composed[-1])))
    suffix = [1.0] * (L + 1)
    for i in range(L - 1, -1, -1):
        suffix[i] = float(kappa_prime(composed[i])) * suffix[i + 1]
    return nx * ny * sum(composed[h] * suffix[h] for h in range(L + 1))


def _gram_layer_pass(dual, deriv, gram, theta, row_diag, col_diag, depth, diag_cols):
    """Run the layer recursion on a (rows x cols) Gram block.

    diag_cols[r] gives the column where local row r meets its own diagonal
    entry; the cosine there is pinned to exactly 1 so the steep arccos-type
    derivative duals see the true value rather than 1 minus an ulp.
    """
    rows_idx = np.arange(gram.shape[0])
    for h in range(depth):
        ar = np.sqrt(row_diag)
        ac = np.sqrt(col_diag)
        cos = np.clip(gram / (ar[:, None] * ac[None, :]), -1.0, 1.0)
        np.copysign(1.0, cos, out=cos, where=np.abs(cos) > _SNAP)
        cos[rows_idx, diag_cols] = 1.0
        k_new = np.asarray(dual.eval(ar[:, None], ac[None, :], cos), dtype=float)
        k_dot = np.asarray(deriv(ar[:, None], ac[None, :], cos), dtype=float)
        theta = theta * k_dot + k_new
        gram = k_new
        row_diag = np.asarray(dual.eval(ar, ar, 1.0), dtype=float)
        col_diag = np.asarray(dual.eval(ac, ac, 1.0), dtype=float)
        if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(theta))):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h + 1}")
        if np.any(row_diag <= 0.0) or np.any(col_diag <= 0.0):
            raise NonFiniteKernel(f"kernel variance collapsed at layer {h + 1}")
    return gram, theta


def kernel_matrix(X, cfg: KernelConfig, which: str = "ntk") -> KernelMatrix:
    """Dense depth-L kernel matrix over the rows of X.

    which selects "nngp" or "ntk". The recursion runs vectorized over the
    whole matrix (entries depend only on the three per-pair statistics, and
    the diagonal evolves independently), which matches nngp_ntk_pair exactly.
    Set NKE_THREADS > 1 to split row blocks across numpy-releasing threads;
    the output is identical at any thread count.
    """
    if which not in ("nngp", "ntk"):
        raise BadParams(f"which must be 'nngp' or 'ntk', got {which!r}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"X must be 2-D (points by features), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise BadParams("X contains non-finite entries")
    sq = np.einsum("ij,ij->i", X, X)
    if np.any(sq == 0.0):
        idx = int(np.argmax(sq == 0.0))
        raise ZeroNormInput(f"row {idx} of X has zero norm")
    n = X.shape[0]
    gram0 = X @ X.T
    deriv = _deriv_evaluator(cfg.dual)

    threads = int(os.environ.get("NKE_THREADS", "1") or "1")
    if threads > 1 and n >= 2 * threads:
        from concurrent.futures import ThreadPoolExecutor

        blocks = np.array_split(np.arange(n), threads)

        def run(rows):
            g, t = _gram_layer_pass(cfg.dual, deriv, gram0[rows], gram0[rows], sq[rows], sq, cfg.depth, rows)
            return rows, g, t

        out = np.empty((n, n))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows, g, t in pool.map(run, blocks):
                out[rows] = g if which == "nngp" else t
    else:
        g, t = _gram_layer_pass(cfg.dual, deriv, gram0, gram0.copy(), sq, sq, cfg.depth, np.arange(n))
        out = g if which == "nngp" else t
    out = 0.5 * (out + out.T)
    return KernelMatrix(n=n, entries=out)
