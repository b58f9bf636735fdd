"""Convolutional NTK with global average pooling: exact values and sketches.

The exact kernel of two images y, z (shape d1 x d2 x c) follows the layer
recursion over pixel-pair grids. With patch radius r = (q-1)/2 and S the
patch sum S(T)[i,j,i',j'] = sum_{|a|,|b|<=r} T[i+a,j+b,i'+a,j'+b] (terms off
the image contribute zero),

    Gamma^0[i,j,i',j'] = <y[i,j,:], z[i',j',:]>,      K^h = S(Gamma^h),
    Gamma^h = (1/q^2) k_sigma(a, b, c),  a^2 = K^{h-1}[i,j,i,j](y,y),
                                         b^2 = K^{h-1}[i',j',i',j'](z,z),
                                         c = K^{h-1}(y,z) / (a b),
    Pi^0 = 0,   Pi^h = S(Pi^{h-1} o Gammadot^h + Gamma^h)   for h < L,
    Pi^L = Pi^{L-1} o Gammadot^L,
    Theta = mean of Pi^L over all pixel pairs,

where Gammadot evaluates the derivative dual at the same (a, b, c) and o is
the entrywise product. Only the diagonal of the self grids is ever needed,
so each image carries a d1 x d2 variance grid beside the 4-index pair grids.

For a homogeneous dual k(a, b, c) = a b kappa(c) the variances close over
the norm grids N^0 = q^2 |x[i,j,:]|^2, N^h = (1/q^2) S(N^{h-1}), giving

    Gamma^h = sqrt(N^h(y) N^h(z)) / q^2 * kappa(A),
    Gammadot^h = kappa'(A) / q^2,
    A = S(Gamma^{h-1}) / sqrt(N^h(y) N^h(z)),

with A := 0 where the denominator vanishes (an all-zero patch carries no
signal; the zero extension is shared by every path here). The two routes
agree only when kappa(1) = 1, since the general recursion passes variances
through the dual while the norm grids are plain patch averages.

The sketch replaces kappa and kappa' by nonnegative-coefficient polynomials
and mirrors the recursion with randomized features per pixel: mu stacks the
previous layer's feature blocks over the patch and divides by sqrt(N^h);
Z_l sketches mu^(x)l through one shared PolySketch tree per layer; phi
weights the Z blocks by sqrt(a_l) and phidot by sqrt(b_l); the tangent
feature appends, over the patch, a degree-2 sketch of psi (x) phidot next
to phi, and the last layer keeps only the degree-2 sketch of its own pixel.
The returned feature vector averages the pixels, so its inner products
concentrate around Theta. Between layers the concatenated phi and psi
blocks are recompressed to sketch_dim and tangent_dim coordinates with
seeded SRHTs; that keeps every per-pixel vector at O(q^2 m) length and the
per-image cost linear in the pixel count, and adds one more inner-product
preserving stage of the same variance order as the tree nodes.

Exact grids cost (d1 d2)^2 memory, so the exact paths refuse images beyond
cfg.pixel_budget pixels; the sketch has no such limit.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .duals import DualActivation, derivative_dual_numeric
from .embed import _clean_coeffs
from .errors import BadParams, NonFiniteKernel, NotHomogeneous, ShapeMismatch
from .fc_kernels import KernelMatrix, _SNAP, _deriv_evaluator
from .polysketch import (
    polysketch_powers,
    polysketch_tensor,
    polysketch_tree,
    srht_apply,
    srht_instance,
)

__all__ = [
    "CntkConfig",
    "cntk_exact",
    "cntk_exact_homogeneous",
    "cntk_sketch_features",
    "cntk_kernel_matrix",
]


@dataclass(frozen=True)
class CntkConfig:
    """Depth, filter size, dual activation, and sketch sizes.

    sketch_dim is the width of each per-degree feature block, tangent_dim
    the width of the degree-2 blocks accumulating the tangent kernel. The
    exact paths ignore both but refuse images with more than pixel_budget
    pixels, since their grids grow with the squared pixel count.
    """

    depth: int
    filter_size: int
    dual: DualActivation
    sketch_dim: int = 1024
    tangent_dim: int = 1024
    seed: int = 0
    pixel_budget: int = 4096

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise BadParams(f"depth must be a positive integer, got {self.depth!r}")
        q = self.filter_size
        if not isinstance(q, (int, np.integer)) or q < 1 or q % 2 == 0:
            raise BadParams(f"filter_size must be a positive odd integer, got {q!r}")
        for name in ("sketch_dim", "tangent_dim", "pixel_budget"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise BadParams(f"{name} must be >= 1, got {v!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise BadParams(f"seed must be a nonnegative integer, got {self.seed!r}")


def _as_image(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or min(x.shape) < 1:
        raise ShapeMismatch(
            f"{name} must be a d1 x d2 x channels array, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise BadParams(f"{name} contains non-finite entries")
    return x


def _as_image_pair(y, z) -> Tuple[np.ndarray, np.ndarray]:
    y = _as_image(y, "y")
    z = _as_image(z, "z")
    if y.shape != z.shape:
        raise ShapeMismatch(f"image shapes differ: {y.shape} vs {z.shape}")
    return y, z


def _check_budget(d1: int, d2: int, cfg: CntkConfig) -> None:
    if d1 * d2 > cfg.pixel_budget:
        raise BadParams(
            f"exact grids for a {d1}x{d2} image hold ({d1 * d2})^2 entries, over "
            f"the pixel budget {cfg.pixel_budget}; raise pixel_budget or sketch"
        )


def _patch_sum_2d(g: np.ndarray, r: int) -> np.ndarray:
    """Zero-padded q x q box sum over a d1 x d2 grid."""
    d1, d2 = g.shape
    out = np.zeros_like(g)
    for a in range(-r, r + 1):
        ilo, ihi = max(0, -a), min(d1, d1 - a)
        if ihi <= ilo:
            continue
        for b in range(-r, r + 1):
            jlo, jhi = max(0, -b), min(d2, d2 - b)
            if jhi <= jlo:
                continue
            out[ilo:ihi, jlo:jhi] += g[ilo + a : ihi + a, jlo + b : jhi + b]
    return out


def _patch_sum_4d(t: np.ndarray, r: int) -> np.ndarray:
    """Patch sum with the same offset applied to both pixel indices."""
    d1, d2 = t.shape[0], t.shape[1]
    out = np.zeros_like(t)
    for a in range(-r, r + 1):
        ilo, ihi = max(0, -a), min(d1, d1 - a)
        if ihi <= ilo:
            continue
        for b in range(-r, r + 1):
            jlo, jhi = max(0, -b), min(d2, d2 - b)
            if jhi <= jlo:
                continue
            out[ilo:ihi, jlo:jhi, ilo:ihi, jlo:jhi] += t[
                ilo + a : ihi + a, jlo + b : jhi + b, ilo + a : ihi + a, jlo + b : jhi + b
            ]
    return out


def _cosine_grid(num: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """num/denom clipped to [-1, 1], zero where denom vanishes, snapped at 1."""
    alive = denom > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(alive, num / np.where(alive, denom, 1.0), 0.0)
    np.clip(cos, -1.0, 1.0, out=cos)
    np.copysign(1.0, cos, out=cos, where=np.abs(cos) > _SNAP)
    return cos


def cntk_exact(y, z, cfg: CntkConfig) -> float:
    """Depth-L convolutional NTK of two images under any dual activation.

    Runs the pixel-pair recursion with zero padding at the borders; depth 1
    is identically zero since the tangent grid starts at zero and the last
    layer only multiplies it by the derivative grid.
    """
    y, z = _as_image_pair(y, z)
    d1, d2, _c = y.shape
    _check_budget(d1, d2, cfg)
    r = (cfg.filter_size - 1) // 2
    q2 = float(cfg.filter_size**2)
    dual = cfg.dual
    deriv = _deriv_evaluator(dual)

    gy = np.einsum("ijl,ijl->ij", y, y)
    gz = np.einsum("ijl,ijl->ij", z, z)
    gram = np.einsum("ijl,IJl->ijIJ", y, z)
    pi = np.zeros_like(gram)
    for h in range(1, cfg.depth + 1):
        var_y = _patch_sum_2d(gy, r)
        var_z = _patch_sum_2d(gz, r)
        k_prev = _patch_sum_4d(gram, r)
        if not (
            np.all(np.isfinite(var_y))
            and np.all(np.isfinite(var_z))
            and np.all(np.isfinite(k_prev))
        ):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h}")
        ay = np.sqrt(var_y)
        az = np.sqrt(var_z)
        cos = _cosine_grid(k_prev, ay[:, :, None, None] * az[None, None, :, :])
        ay_safe = np.where(ay > 0.0, ay, 1.0)
        az_safe = np.where(az > 0.0, az, 1.0)
        a4 = ay_safe[:, :, None, None]
        b4 = az_safe[None, None, :, :]
        gram = np.asarray(dual.eval(a4, b4, cos), dtype=float) / q2
        g_dot = np.asarray(deriv(a4, b4, cos), dtype=float) / q2
        dead = (ay[:, :, None, None] * az[None, None, :, :]) == 0.0
        if dead.any():
            gram[dead] = 0.0
            g_dot[dead] = 0.0
        gy = np.where(var_y > 0.0, np.asarray(dual.eval(ay_safe, ay_safe, 1.0), dtype=float), 0.0) / q2
        gz = np.where(var_z > 0.0, np.asarray(dual.eval(az_safe, az_safe, 1.0), dtype=float), 0.0) / q2
        if h < cfg.depth:
            pi = _patch_sum_4d(pi * g_dot + gram, r)
        else:
            pi = pi * g_dot
        if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(pi))):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h}")
        if np.any(gy < 0.0) or np.any(gz < 0.0):
            raise NonFiniteKernel(f"kernel variance collapsed at layer {h}")
    return float(pi.mean())


def _require_homogeneous(dual: DualActivation) -> None:
    if not dual.is_homogeneous or dual.kappa is None:
        raise NotHomogeneous(
            f"dual '{dual.name}' is not homogeneous; this path needs "
            "eval(a, b, c) = a*b*kappa(c)"
        )


def _kappa_prime(dual: DualActivation) -> Callable:
    """kappa' of a homogeneous dual, via its derivative dual when closed."""
    if dual.deriv_eval is not None:
        return lambda t: np.asarray(dual.deriv_eval(1.0, 1.0, t), dtype=float)
    return np.vectorize(
        lambda t: derivative_dual_numeric(dual, 1.0, 1.0, float(t))
    )


def _homogeneous_layers(
    y: np.ndarray, z: np.ndarray, cfg: CntkConfig
) -> Iterator[Tuple[int, np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray], np.ndarray]]:
    """Yield (h, N^h(y), N^h(z), Gamma^h, Gammadot^h, Pi^h) per layer."""
    r = (cfg.filter_size - 1) // 2
    q2 = float(cfg.filter_size**2)
    kappa = cfg.dual.kappa
    kprime = _kappa_prime(cfg.dual)

    n_y = q2 * np.einsum("ijl,ijl->ij", y, y)
    n_z = q2 * np.einsum("ijl,ijl->ij", z, z)
    gram = np.einsum("ijl,IJl->ijIJ", y, z)
    pi = np.zeros_like(gram)
    yield 0, n_y, n_z, gram, None, pi
    for h in range(1, cfg.depth + 1):
        n_y = _patch_sum_2d(n_y, r) / q2
        n_z = _patch_sum_2d(n_z, r) / q2
        if not (np.all(np.isfinite(n_y)) and np.all(np.isfinite(n_z))):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h}")
        denom = np.sqrt(n_y[:, :, None, None] * n_z[None, None, :, :])
        cos = _cosine_grid(_patch_sum_4d(gram, r), denom)
        gram = (denom / q2) * np.asarray(kappa(cos), dtype=float)
        g_dot = np.asarray(kprime(cos), dtype=float) / q2
        if g_dot.shape != gram.shape:
            g_dot = np.broadcast_to(g_dot, gram.shape).copy()
        if h < cfg.depth:
            pi = _patch_sum_4d(pi * g_dot + gram, r)
        else:
            pi = pi * g_dot
        if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(pi))):
            raise NonFiniteKernel(f"kernel recursion diverged at layer {h}")
        yield h, n_y, n_z, gram, g_dot, pi


def cntk_exact_homogeneous(y, z, cfg: CntkConfig) -> float:
    """Convolutional NTK through the norm-grid form of a homogeneous dual.

    Equals cntk_exact only when kappa(1) = 1: the norm grids are plain
    patch averages, while the general recursion renormalizes variances
    through the dual at every layer.
    """
    y, z = _as_image_pair(y, z)
    _require_homogeneous(cfg.dual)
    _check_budget(y.shape[0], y.shape[1], cfg)
    pi = None
    for _h, _ny, _nz, _gram, _gdot, pi in _homogeneous_layers(y, z, cfg):
        pass
    return float(pi.mean())


# ---------------------------------------------------------------------------
# sketched features


def _stage_seed(master: int, layer: int, stage: int) -> int:
    ss = np.random.SeedSequence((master, layer, stage))
    return int(ss.generate_state(1, np.uint64)[0])


_STAGE_POWERS, _STAGE_PHI, _STAGE_PAIR, _STAGE_PSI = range(4)


def _patch_concat(feat: np.ndarray, d1: int, d2: int, r: int) -> np.ndarray:
    """Stack each pixel's patch of feature rows into one long row.

    feat has one row per pixel (row-major over d1 x d2); block (a, b) of the
    output holds the feature of the pixel shifted by that offset, zeros when
    the shift leaves the image.
    """
    k = feat.shape[1]
    q = 2 * r + 1
    grid = feat.reshape(d1, d2, k)
    blocks = np.zeros((d1, d2, q * q, k))
    slot = 0
    for a in range(-r, r + 1):
        ilo, ihi = max(0, -a), min(d1, d1 - a)
        for b in range(-r, r + 1):
            jlo, jhi = max(0, -b), min(d2, d2 - b)
            if ihi > ilo and jhi > jlo:
                blocks[ilo:ihi, jlo:jhi, slot, :] = grid[
                    ilo + a : ihi + a, jlo + b : jhi + b, :
                ]
            slot += 1
    return blocks.reshape(d1 * d2, q * q * k)


def _pad_cols(arr: np.ndarray, width: int) -> np.ndarray:
    if arr.shape[1] == width:
        return arr
    out = np.zeros((arr.shape[0], width))
    out[:, : arr.shape[1]] = arr
    return out


def cntk_sketch_features(x, cfg: CntkConfig, kappa_poly, kappa_prime_poly) -> np.ndarray:
    """Feature vector whose inner products track the homogeneous CNTK.

    kappa_poly and kappa_prime_poly are nonnegative coefficient vectors
    standing in for kappa and kappa'; they are used as given, so a truncated
    series with kappa_poly(1) < 1 biases the features by exactly the
    truncated mass. The output length is cfg.tangent_dim regardless of the
    image content, and the map is deterministic given cfg.seed.
    """
    x = _as_image(x, "x")
    _require_homogeneous(cfg.dual)
    a_coeffs = _clean_coeffs(kappa_poly, "kappa_poly")
    b_coeffs = _clean_coeffs(kappa_prime_poly, "kappa_prime_poly")
    d1, d2, _c = x.shape
    n_pix = d1 * d2
    r = (cfg.filter_size - 1) // 2
    q = float(cfg.filter_size)
    q2 = q * q
    m = int(cfg.sketch_dim)
    m_t = int(cfg.tangent_dim)

    norm_grids: List[np.ndarray] = [q2 * np.einsum("ijl,ijl->ij", x, x)]
    for _h in range(cfg.depth):
        norm_grids.append(_patch_sum_2d(norm_grids[-1], r) / q2)

    deg_a = [int(j) for j in np.nonzero(a_coeffs)[0]]
    deg_b = [int(j) for j in np.nonzero(b_coeffs)[0]]
    needed = sorted({j for j in deg_a + deg_b if j >= 1})
    unit = np.zeros(m)
    unit[0] = 1.0

    phi = x.reshape(n_pix, -1)
    psi = np.zeros((n_pix, 1))
    for h in range(1, cfg.depth + 1):
        n_h = norm_grids[h].reshape(n_pix)
        scale = np.where(n_h > 0.0, 1.0 / np.sqrt(np.where(n_h > 0.0, n_h, 1.0)), 0.0)
        mu = _patch_concat(phi, d1, d2, r) * scale[:, None]
        if needed:
            tree = polysketch_tree(
                mu.shape[1], m, max(needed), _stage_seed(cfg.seed, h, _STAGE_POWERS)
            )
            sketches = polysketch_powers(tree, mu, needed)
        else:
            sketches = {}
        sketches[0] = np.broadcast_to(unit, (n_pix, m))

        phi_dot = (
            np.concatenate([math.sqrt(b_coeffs[j]) * sketches[j] for j in deg_b], axis=1) / q
            if deg_b
            else np.zeros((n_pix, 1))
        )
        pair_dim = max(psi.shape[1], phi_dot.shape[1])
        pair_tree = polysketch_tree(
            pair_dim, m_t, 2, _stage_seed(cfg.seed, h, _STAGE_PAIR)
        )
        tangent = polysketch_tensor(
            pair_tree, [_pad_cols(psi, pair_dim), _pad_cols(phi_dot, pair_dim)]
        )
        if h < cfg.depth:
            phi_new = (
                np.concatenate([math.sqrt(a_coeffs[j]) * sketches[j] for j in deg_a], axis=1)
                * (np.sqrt(n_h)[:, None] / q)
                if deg_a
                else np.zeros((n_pix, 1))
            )
            squeeze_phi = srht_instance(
                phi_new.shape[1], m, _stage_seed(cfg.seed, h, _STAGE_PHI)
            )
            phi = srht_apply(squeeze_phi, phi_new)
            stacked = _patch_concat(np.concatenate([tangent, phi], axis=1), d1, d2, r)
            squeeze_psi = srht_instance(
                stacked.shape[1], m_t, _stage_seed(cfg.seed, h, _STAGE_PSI)
            )
            psi = srht_apply(squeeze_psi, stacked)
        else:
            psi = tangent
    return psi.mean(axis=0)


def cntk_kernel_matrix(
    images: Sequence,
    cfg: CntkConfig,
    mode: str = "exact",
    kappa_poly=None,
    kappa_prime_poly=None,
) -> KernelMatrix:
    """Pairwise CNTK matrix, exact or from sketched features.

    Exact mode routes homogeneous duals through the norm-grid form and
    everything else through the general recursion. Sketch mode needs the
    polynomial pair and returns the Gram matrix of the feature vectors,
    symmetrized and positive semidefinite by construction. Set NKE_THREADS
    > 1 to spread images (or pairs) over threads; the entries are identical
    at any thread count.
    """
    if mode not in ("exact", "sketch"):
        raise BadParams(f"mode must be 'exact' or 'sketch', got {mode!r}")
    imgs = [_as_image(im, f"images[{k}]") for k, im in enumerate(images)]
    if not imgs:
        raise BadParams("images must be a nonempty sequence")
    shape = imgs[0].shape
    for k, im in enumerate(imgs):
        if im.shape != shape:
            raise ShapeMismatch(
                f"images[{k}] has shape {im.shape}, expected {shape}"
            )
    n = len(imgs)
    threads = int(os.environ.get("NKE_THREADS", "1") or "1")

    if mode == "sketch":
        if kappa_poly is None or kappa_prime_poly is None:
            raise BadParams("sketch mode needs kappa_poly and kappa_prime_poly")

        def featurize(im):
            return cntk_sketch_features(im, cfg, kappa_poly, kappa_prime_poly)

        if threads > 1 and n >= 2:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                feats = np.stack(list(pool.map(featurize, imgs)))
        else:
            feats = np.stack([featurize(im) for im in imgs])
        entries = feats @ feats.T
        entries = 0.5 * (entries + entries.T)
        return KernelMatrix(n, entries)

    homogeneous = cfg.dual.is_homogeneous and cfg.dual.kappa is not None
    pair_fn = cntk_exact_homogeneous if homogeneous else cntk_exact
    pairs = [(i, j) for i in range(n) for j in range(i + 1)]
    entries = np.empty((n, n))

    def solve(pair):
        i, j = pair
        return i, j, pair_fn(imgs[i], imgs[j], cfg)

    if threads > 1 and len(pairs) >= 2:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, pairs))
    else:
        results = [solve(p) for p in pairs]
    for i, j, val in results:
        entries[i, j] = val
        entries[j, i] = val
    return KernelMatrix(n, entries)
