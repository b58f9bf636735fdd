"""Randomized sketches for high-degree tensor products.

The building block is the subsampled randomized Hadamard transform: flip
signs entrywise, zero-pad to a power of two, apply the Walsh-Hadamard
transform, keep m uniformly sampled coordinates, and rescale so the squared
norm is preserved in expectation. The classical SRHT uses the real Hadamard
transform rather than an FFT, which keeps features real with the same
second-moment guarantees.

Degree-p tensor powers are sketched by a binary tree. Leaves apply
independent SRHTs to the input slots; each internal node sketches the tensor
product of its two children with a TensorSRHT, whose sign vector factors as
s1 (x) s2. Factoring makes the m^2-dimensional transform split,

    H (s o (u (x) v)) = (H (s1 o u)) (x) (H (s2 o v)),

so a node never materializes u (x) v: it transforms each m-vector factor and
multiplies sampled coordinate pairs. Slots beyond the requested degree are
filled with the sketch of the first standard basis vector, which leaves
inner products of lower-degree tensors unchanged.

All randomness derives from a single master seed; each sketch in the tree
draws from an independent stream keyed by (master seed, level, node index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import BadParams, DimensionMismatch

__all__ = [
    "SrhtInstance",
    "TensorSrhtInstance",
    "PolySketchTree",
    "srht_instance",
    "srht_apply",
    "tensor_srht_instance",
    "tensor_srht_apply",
    "polysketch_tree",
    "polysketch_tensor",
    "polysketch_power",
    "polysketch_powers",
]


def _next_pow2(n: int) -> int:
    return 1 << max(0, n - 1).bit_length() if n > 1 else 1


def _fwht(mat: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis."""
    n = mat.shape[-1]
    out = np.array(mat, dtype=float)
    flat = out.reshape(-1, n)
    h = 1
    while h < n:
        view = flat.reshape(flat.shape[0], n // (2 * h), 2, h)
        low = view[:, :, 0, :]
        high = view[:, :, 1, :]
        diff = low - high
        low += high
        high[...] = diff
        h *= 2
    return out


def _child_seed(master: int, level: int, node: int) -> int:
    ss = np.random.SeedSequence((master, level, node))
    return int(ss.generate_state(1, np.uint64)[0])


def _check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise BadParams(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


@dataclass(frozen=True)
class SrhtInstance:
    """One subsampled randomized Hadamard transform R^d -> R^m."""

    input_dim: int
    target_dim: int
    signs: np.ndarray
    sample_indices: np.ndarray
    seed: int


@dataclass(frozen=True)
class TensorSrhtInstance:
    """Sketch of R^{m x m} tensor products with factored signs."""

    factor_dim: int
    target_dim: int
    signs_left: np.ndarray
    signs_right: np.ndarray
    left_indices: np.ndarray
    right_indices: np.ndarray
    seed: int


def srht_instance(input_dim: int, target_dim: int, seed: int) -> SrhtInstance:
    """Draw signs and sample indices for an SRHT from the given seed."""
    if input_dim < 1 or target_dim < 1:
        raise BadParams(
            f"input_dim and target_dim must be >= 1, got {input_dim}, {target_dim}"
        )
    seed = _check_seed(seed)
    d_pad = _next_pow2(input_dim)
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=d_pad).astype(float) * 2.0 - 1.0
    idx = rng.integers(0, d_pad, size=target_dim)
    return SrhtInstance(int(input_dim), int(target_dim), signs, idx, seed)


def srht_apply(s: SrhtInstance, x) -> np.ndarray:
    """Apply the SRHT to x (last axis is the input dimension).

    The output equals the sampled coordinates of the Hadamard transform of
    the sign-flipped, zero-padded input, divided by sqrt(m); with that scale
    E[norm(out)^2] = norm(x)^2 over the index draw.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != s.input_dim:
        raise DimensionMismatch(
            f"expected last axis {s.input_dim}, got shape {x.shape}"
        )
    lead = x.shape[:-1]
    flat = x.reshape(-1, s.input_dim)
    d_pad = s.signs.shape[0]
    padded = np.zeros((flat.shape[0], d_pad))
    padded[:, : s.input_dim] = flat
    padded *= s.signs
    z = _fwht(padded)[:, s.sample_indices] / math.sqrt(s.target_dim)
    return z.reshape(lead + (s.target_dim,))


def tensor_srht_instance(factor_dim: int, target_dim: int, seed: int) -> TensorSrhtInstance:
    """Draw a TensorSRHT for products of two factor_dim-vectors."""
    if factor_dim < 1 or target_dim < 1:
        raise BadParams(
            f"factor_dim and target_dim must be >= 1, got {factor_dim}, {target_dim}"
        )
    seed = _check_seed(seed)
    m_pad = _next_pow2(factor_dim)
    rng = np.random.default_rng(seed)
    signs_left = rng.integers(0, 2, size=m_pad).astype(float) * 2.0 - 1.0
    signs_right = rng.integers(0, 2, size=m_pad).astype(float) * 2.0 - 1.0
    left = rng.integers(0, m_pad, size=target_dim)
    right = rng.integers(0, m_pad, size=target_dim)
    return TensorSrhtInstance(
        int(factor_dim), int(target_dim), signs_left, signs_right, left, right, seed
    )


def _pad_last(x: np.ndarray, n: int) -> np.ndarray:
    if x.shape[-1] == n:
        return x
    out = np.zeros(x.shape[:-1] + (n,))
    out[..., : x.shape[-1]] = x
    return out


def tensor_srht_apply(t: TensorSrhtInstance, u, v) -> np.ndarray:
    """Sketch u (x) v without forming it.

    Each factor is sign-flipped and Hadamard-transformed on its own; output
    coordinate k is the product of the transforms at the sampled index pair,
    again divided by sqrt(m).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim == 0 or u.shape[-1] != t.factor_dim:
        raise DimensionMismatch(
            f"expected two arrays with last axis {t.factor_dim}, got {u.shape}, {v.shape}"
        )
    lead = u.shape[:-1]
    m_pad = t.signs_left.shape[0]
    a = _fwht(_pad_last(u.reshape(-1, t.factor_dim), m_pad) * t.signs_left)
    b = _fwht(_pad_last(v.reshape(-1, t.factor_dim), m_pad) * t.signs_right)
    z = a[:, t.left_indices] * b[:, t.right_indices] / math.sqrt(t.target_dim)
    return z.reshape(lead + (t.target_dim,))


@dataclass(frozen=True)
class PolySketchTree:
    """Binary tree of sketches for tensor powers up to a fixed degree.

    leaves holds 2^ceil(log2 degree) SRHTs from the input space; levels[i]
    holds the TensorSRHT nodes at height i+1, halving in count per level up
    to the root.
    """

    degree: int
    input_dim: int
    target_dim: int
    leaves: Tuple[SrhtInstance, ...]
    levels: Tuple[Tuple[TensorSrhtInstance, ...], ...]
    seed: int


def polysketch_tree(input_dim: int, target_dim: int, degree: int, seed: int) -> PolySketchTree:
    """Build all leaf and internal sketches from one master seed."""
    if degree < 1:
        raise BadParams(f"degree must be >= 1, got {degree}")
    if input_dim < 1 or target_dim < 1:
        raise BadParams(
            f"input_dim and target_dim must be >= 1, got {input_dim}, {target_dim}"
        )
    seed = _check_seed(seed)
    p_pad = _next_pow2(degree)
    leaves = tuple(
        srht_instance(input_dim, target_dim, _child_seed(seed, 0, j))
        for j in range(p_pad)
    )
    levels = []
    width = p_pad // 2
    level = 1
    while width >= 1:
        levels.append(
            tuple(
                tensor_srht_instance(target_dim, target_dim, _child_seed(seed, level, j))
                for j in range(width)
            )
        )
        width //= 2
        level += 1
    return PolySketchTree(int(degree), int(input_dim), int(target_dim), leaves, tuple(levels), seed)


def _basis_vector(dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def polysketch_tensor(tree: PolySketchTree, slots: Sequence) -> np.ndarray:
    """Sketch the tensor product of the given slot vectors.

    Accepts up to tree.degree slots, each with last axis tree.input_dim
    (leading axes broadcast as a batch). Missing slots up to the padded
    width are filled with the first standard basis vector, so a length-p'
    input sketches x_1 (x) ... (x) x_p' (x) e1 (x) ... (x) e1.
    """
    slots = list(slots)
    if not 1 <= len(slots) <= tree.degree:
        raise DimensionMismatch(
            f"expected between 1 and {tree.degree} slots, got {len(slots)}"
        )
    arrs = [np.asarray(s, dtype=float) for s in slots]
    lead = arrs[0].shape[:-1]
    for a in arrs:
        if a.ndim == 0 or a.shape[-1] != tree.input_dim or a.shape[:-1] != lead:
            raise DimensionMismatch(
                f"every slot must have shape (..., {tree.input_dim}) with matching batch axes"
            )
    p_pad = len(tree.leaves)
    e1 = _basis_vector(tree.input_dim)
    padded = arrs + [np.broadcast_to(e1, lead + (tree.input_dim,)) for _ in range(p_pad - len(arrs))]
    current = [srht_apply(leaf, vec) for leaf, vec in zip(tree.leaves, padded)]
    for nodes in tree.levels:
        current = [
            tensor_srht_apply(node, current[2 * j], current[2 * j + 1])
            for j, node in enumerate(nodes)
        ]
    return current[0]


def polysketch_power(tree: PolySketchTree, x, p_eff: int) -> np.ndarray:
    """Sketch x^(x) p_eff; degree 0 is the fixed first basis vector of R^m."""
    if not isinstance(p_eff, (int, np.integer)) or p_eff < 0:
        raise BadParams(f"p_eff must be a nonnegative integer, got {p_eff!r}")
    if p_eff > tree.degree:
        raise DimensionMismatch(
            f"p_eff = {p_eff} exceeds the tree degree {tree.degree}"
        )
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != tree.input_dim:
        raise DimensionMismatch(
            f"expected last axis {tree.input_dim}, got shape {x.shape}"
        )
    if p_eff == 0:
        out = np.zeros(x.shape[:-1] + (tree.target_dim,))
        out[..., 0] = 1.0
        return out
    return polysketch_tensor(tree, [x] * int(p_eff))


def _combine(node: TensorSrhtInstance, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """TensorSRHT combine that broadcasts a constant factor."""
    m_pad = node.signs_left.shape[0]
    a = _fwht(_pad_last(u, m_pad) * node.signs_left)
    b = _fwht(_pad_last(v, m_pad) * node.signs_right)
    return a[..., node.left_indices] * b[..., node.right_indices] / math.sqrt(
        node.target_dim
    )


def polysketch_powers(
    tree: PolySketchTree, x, degrees: Sequence[int]
) -> Dict[int, np.ndarray]:
    """Sketches of x^(x)l for each l in degrees, sharing the tree.

    x is a batch of rows (n, input_dim); the result maps l to an (n,
    target_dim) array identical to polysketch_power(tree, x, l). Leaves and
    full or constant subtrees are evaluated once, so the whole degree range
    costs O(degree) tree nodes beyond a single power.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[-1] != tree.input_dim:
        raise DimensionMismatch(
            f"expected a batch of shape (n, {tree.input_dim}), got {x.shape}"
        )
    for ell in degrees:
        if not isinstance(ell, (int, np.integer)) or ell < 0:
            raise BadParams(f"degrees must be nonnegative integers, got {ell!r}")
        if ell > tree.degree:
            raise DimensionMismatch(
                f"degree {ell} exceeds the tree degree {tree.degree}"
            )
    e1 = _basis_vector(tree.input_dim)
    height = len(tree.levels)
    leaf_x: Dict[int, np.ndarray] = {}
    leaf_e: Dict[int, np.ndarray] = {}
    full: Dict[Tuple[int, int], np.ndarray] = {}
    const: Dict[Tuple[int, int], np.ndarray] = {}

    def leaf(j: int, on_x: bool) -> np.ndarray:
        memo = leaf_x if on_x else leaf_e
        if j not in memo:
            memo[j] = srht_apply(tree.leaves[j], x if on_x else e1)
        return memo[j]

    def full_val(i: int, j: int) -> np.ndarray:
        if i == 0:
            return leaf(j, True)
        if (i, j) not in full:
            node = tree.levels[i - 1][j]
            full[(i, j)] = _combine(node, full_val(i - 1, 2 * j), full_val(i - 1, 2 * j + 1))
        return full[(i, j)]

    def const_val(i: int, j: int) -> np.ndarray:
        if i == 0:
            return leaf(j, False)
        if (i, j) not in const:
            node = tree.levels[i - 1][j]
            const[(i, j)] = _combine(node, const_val(i - 1, 2 * j), const_val(i - 1, 2 * j + 1))
        return const[(i, j)]

    def value(i: int, j: int, ell: int) -> np.ndarray:
        lo, hi = j << i, (j + 1) << i
        if hi <= ell:
            return full_val(i, j)
        if lo >= ell:
            return const_val(i, j)
        node = tree.levels[i - 1][j]
        return _combine(node, value(i - 1, 2 * j, ell), value(i - 1, 2 * j + 1, ell))

    out: Dict[int, np.ndarray] = {}
    for ell in degrees:
        if ell == 0:
            root = np.zeros((x.shape[0], tree.target_dim))
            root[:, 0] = 1.0
        else:
            root = value(height, 0, int(ell))
            if root.ndim == 1:
                root = np.broadcast_to(root, (x.shape[0], root.shape[0]))
        out[int(ell)] = root
    return out
