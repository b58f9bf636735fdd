"""Command line front end: kernels, embeddings, benchmarks, regression.

Every subcommand prints one JSON summary to standard output and optional
progress lines to standard error; matrices and feature tables go to the
path given by --output (CSV for small artifacts, NKE1 binary for large
ones, see dataio). Exit codes: 0 success, 2 usage error, 3 data error,
4 numerical failure. Identical flags (including --seed) produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from .cntk import CntkConfig, cntk_kernel_matrix, cntk_sketch_features
from .dataio import read_image, read_matrix, write_matrix
from .duals import activation_lookup, catalog_lookup, gauss_hermite_dual
from .embed import EmbedConfig, embed_dataset, taylor_normalized_gaussian
from .errors import (
    DegreeOverflow,
    DomainError,
    EigenFailure,
    NkeError,
    NonFiniteActivation,
    NonFiniteKernel,
    NotSymmetric,
    SingularSystem,
    ZeroDenominator,
)
from .fc_kernels import KernelConfig, kernel_matrix
from .hermite import hermite_expand
from .metrics import (
    lambda_grid,
    monte_carlo_dual,
    relative_frobenius_error,
    ridge_regress,
    statistical_dimension,
)
from .series import hermite_dual_gram

__all__ = ["cli_main", "main"]

_NUMERICAL_ERRORS = (
    DomainError,
    EigenFailure,
    NonFiniteActivation,
    NonFiniteKernel,
    NotSymmetric,
    SingularSystem,
    ZeroDenominator,
)


class _UsageError(Exception):
    pass


class _DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _progress(message: str) -> None:
    print(f"[nke] {message}", file=sys.stderr)


def _emit(payload: dict, output: Optional[str] = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _floats(raw: str, flag: str) -> List[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError:
        raise _UsageError(f"{flag}: expected comma-separated numbers, got {raw!r}")


def _degree_list(raw: str, flag: str) -> List[int]:
    """Parse "1..20" as an inclusive range or "2,6,20" as a list."""
    try:
        if ".." in raw:
            lo, hi = raw.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(tok) for tok in raw.split(",")]
    except ValueError:
        raise _UsageError(f"{flag}: expected N..M or comma-separated integers, got {raw!r}")


def _spec_params(args) -> tuple:
    return tuple(_floats(args.params, "--params")) if args.params else ()


def _dual_from_args(args):
    try:
        return catalog_lookup(args.activation, _spec_params(args))
    except NkeError as exc:
        raise _UsageError(f"--activation/--params: {exc}")


def _activation_from_args(args):
    try:
        return activation_lookup(args.activation, _spec_params(args))
    except NkeError as exc:
        raise _UsageError(f"--activation/--params: {exc}")


def _load_matrix(path: str, flag: str) -> np.ndarray:
    try:
        return read_matrix(path)
    except (OSError, NkeError) as exc:
        raise _DataError(f"{flag}: {exc}")


def _load_image(path: str, flag: str) -> np.ndarray:
    try:
        return read_image(path)
    except (OSError, NkeError) as exc:
        raise _DataError(f"{flag}: {exc}")


def _write_output(path: str, matrix: np.ndarray, fmt: str) -> str:
    try:
        return write_matrix(path, matrix, fmt)
    except OSError as exc:
        raise _DataError(f"--output: {exc}")


def _embed_polynomials(args):
    """The (kappa, kappa') coefficient pair selected by the flags."""
    if getattr(args, "kappa_coeffs", None):
        kappa = np.asarray(_floats(args.kappa_coeffs, "--kappa-coeffs"))
        return kappa, None
    if args.activation == "normalized_gaussian":
        degree = args.max_degree if args.degree is None else args.degree
        return taylor_normalized_gaussian(degree)
    raise _UsageError(
        "--activation: embedding needs normalized_gaussian or explicit --kappa-coeffs"
    )


def _embed_features(X, cfg: EmbedConfig):
    try:
        return embed_dataset(X, cfg)
    except DegreeOverflow as exc:
        raise _UsageError(
            f"--degree/--depth/--max-degree: {exc}; lower --degree or raise --max-degree"
        )


def _ridge_payload(result) -> dict:
    return {
        "lambdas": list(result.lambdas),
        "scores": [float(s) for s in result.scores],
        "best_lambda": float(result.best_lambda),
        "best_score": float(result.scores[result.best_index]),
        "effective_lambdas": [float(v) for v in result.effective_lambdas],
    }


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_dual_eval(args) -> int:
    if not np.isfinite([args.a, args.b, args.c]).all() or abs(args.c) > 1.0:
        raise _UsageError("--a/--b/--c: need finite values with |c| <= 1")
    if args.a <= 0 or args.b <= 0:
        raise _UsageError("--a/--b: norms must be positive")
    spec = _activation_from_args(args)
    with np.errstate(over="ignore"):
        quad = gauss_hermite_dual(spec, args.a, args.b, args.c, q=args.quad_order)
        closed = None
        try:
            dual = catalog_lookup(args.activation, _spec_params(args))
            closed = float(dual.eval(args.a, args.b, args.c))
        except NkeError:
            pass
    if not np.isfinite(quad) or (closed is not None and not np.isfinite(closed)):
        raise NonFiniteKernel(
            f"dual kernel of {args.activation} overflowed at a={args.a}, b={args.b}"
        )
    payload = {
        "command": "dual-eval",
        "activation": args.activation,
        "a": args.a,
        "b": args.b,
        "c": args.c,
        "closed_form": closed,
        "quadrature": quad,
        "quad_order": args.quad_order,
        "difference": None if closed is None else closed - quad,
    }
    _emit(payload, args.output)
    return 0


def _cmd_kernel(args) -> int:
    dual = _dual_from_args(args)
    X = _load_matrix(args.input, "--input")
    _progress(f"loaded {X.shape[0]} points of dimension {X.shape[1]} from {args.input}")
    start = time.perf_counter()
    K = kernel_matrix(X, KernelConfig(args.depth, dual), args.which)
    fmt = _write_output(args.output, K.entries, args.format)
    _emit(
        {
            "command": "kernel",
            "which": args.which,
            "activation": args.activation,
            "depth": args.depth,
            "n": K.n,
            "output": args.output,
            "format": fmt,
            "seconds": round(time.perf_counter() - start, 6),
        }
    )
    return 0


def _cmd_embed(args) -> int:
    kappa, kappa_prime = _embed_polynomials(args)
    X = _load_matrix(args.input, "--input")
    cfg = EmbedConfig(
        kappa, kappa_prime, args.depth, args.sketch_dim, args.max_degree, args.seed
    )
    _progress(f"embedding {X.shape[0]} points with sketch_dim={args.sketch_dim}")
    start = time.perf_counter()
    phi, psi = _embed_features(X, cfg)
    fmt = _write_output(args.output_ntk, psi.T, args.format)
    summary = {
        "command": "embed",
        "n": X.shape[0],
        "input_dim": X.shape[1],
        "depth": args.depth,
        "sketch_dim": args.sketch_dim,
        "max_degree": args.max_degree,
        "seed": args.seed,
        "ntk_dim": psi.shape[0],
        "output_ntk": args.output_ntk,
        "format": fmt,
        "seconds": round(time.perf_counter() - start, 6),
    }
    if args.output_nngp:
        summary["nngp_dim"] = phi.shape[0]
        summary["output_nngp"] = args.output_nngp
        _write_output(args.output_nngp, phi.T, args.format)
    _emit(summary)
    return 0


def _cntk_config(args, dual) -> CntkConfig:
    try:
        return CntkConfig(
            depth=args.depth,
            filter_size=args.filter_size,
            dual=dual,
            sketch_dim=getattr(args, "sketch_dim", 1024),
            tangent_dim=getattr(args, "tangent_dim", 1024),
            seed=getattr(args, "seed", 0),
            pixel_budget=args.pixel_budget,
        )
    except NkeError as exc:
        raise _UsageError(f"configuration: {exc}")


def _cmd_cntk(args) -> int:
    dual = _dual_from_args(args)
    imgs = [_load_image(p, "--images") for p in args.images]
    cfg = _cntk_config(args, dual)
    _progress(f"running exact convolutional kernel on {len(imgs)} images")
    start = time.perf_counter()
    K = cntk_kernel_matrix(imgs, cfg)
    fmt = _write_output(args.output, K.entries, args.format)
    _emit(
        {
            "command": "cntk",
            "activation": args.activation,
            "depth": args.depth,
            "filter_size": args.filter_size,
            "n": K.n,
            "output": args.output,
            "format": fmt,
            "seconds": round(time.perf_counter() - start, 6),
        }
    )
    return 0


def _cmd_cntk_embed(args) -> int:
    dual = _dual_from_args(args)
    if args.kappa_coeffs or args.kappa_prime_coeffs:
        if not (args.kappa_coeffs and args.kappa_prime_coeffs):
            raise _UsageError(
                "--kappa-coeffs/--kappa-prime-coeffs: supply both or neither"
            )
        kappa = np.asarray(_floats(args.kappa_coeffs, "--kappa-coeffs"))
        kappa_prime = np.asarray(_floats(args.kappa_prime_coeffs, "--kappa-prime-coeffs"))
    elif args.activation == "normalized_gaussian":
        kappa, kappa_prime = taylor_normalized_gaussian(args.degree)
    else:
        raise _UsageError(
            "--activation: sketching needs normalized_gaussian or explicit coefficients"
        )
    imgs = [_load_image(p, "--images") for p in args.images]
    cfg = _cntk_config(args, dual)
    start = time.perf_counter()
    feats = []
    for k, img in enumerate(imgs):
        _progress(f"sketching image {k + 1}/{len(imgs)}")
        feats.append(cntk_sketch_features(img, cfg, kappa, kappa_prime))
    fmt = _write_output(args.output, np.stack(feats), args.format)
    _emit(
        {
            "command": "cntk-embed",
            "activation": args.activation,
            "depth": args.depth,
            "filter_size": args.filter_size,
            "n": len(imgs),
            "feature_dim": int(feats[0].shape[0]),
            "seed": args.seed,
            "output": args.output,
            "format": fmt,
            "seconds": round(time.perf_counter() - start, 6),
        }
    )
    return 0


def _cmd_bench_approx(args) -> int:
    degrees = _degree_list(args.degrees, "--degrees")
    if any(d < 1 for d in degrees):
        raise _UsageError("--degrees: degrees must be >= 1")
    spec = _activation_from_args(args)
    dual = _dual_from_args(args)
    rng = np.random.default_rng(args.seed)
    X = rng.normal(size=(args.n, args.d)) / np.sqrt(args.d)
    norms = np.linalg.norm(X, axis=1)
    cosines = np.clip(
        (X @ X.T) / np.outer(norms, norms), -1.0, 1.0
    )
    exact = np.asarray(dual.eval(norms[:, None], norms[None, :], cosines))
    start = time.perf_counter()
    rows = []
    # expand at the largest row norm so every point sits inside the scale
    # of the truncated activation; outside it the polynomial tail diverges
    nu = float(norms.max())
    for q in degrees:
        _progress(f"hermite approximation at degree {q}")
        hc = hermite_expand(spec.scalar_fn, q, nu=nu)
        approx = hermite_dual_gram(hc, norms, cosines)
        rows.append([float(q), relative_frobenius_error(approx, exact)])
    fmt = _write_output(args.output, np.asarray(rows), args.format)
    summary = {
        "command": "bench-approx",
        "activation": args.activation,
        "n": args.n,
        "d": args.d,
        "seed": args.seed,
        "degrees": degrees,
        "errors": [r[1] for r in rows],
        "output": args.output,
        "format": fmt,
        "seconds": round(time.perf_counter() - start, 6),
    }
    if args.mc_samples:
        mc_seed = int(np.random.SeedSequence((args.seed, 1)).generate_state(1, np.uint64)[0])
        mc = monte_carlo_dual(spec, X, args.mc_samples, seed=mc_seed)
        summary["mc_samples"] = args.mc_samples
        summary["mc_error"] = relative_frobenius_error(mc, exact)
    _emit(summary)
    return 0


def _cmd_regress(args) -> int:
    x_train = _load_matrix(args.train, "--train")
    y_train = _load_matrix(args.train_labels, "--train-labels")
    x_test = _load_matrix(args.test, "--test")
    y_test = _load_matrix(args.test_labels, "--test-labels")
    if x_train.shape[1] != x_test.shape[1]:
        raise _DataError(
            f"--test: dimension {x_test.shape[1]} does not match train {x_train.shape[1]}"
        )
    if y_train.shape[0] != x_train.shape[0]:
        raise _DataError(
            f"--train-labels: {y_train.shape[0]} rows do not match "
            f"the {x_train.shape[0]} training points"
        )
    if y_test.shape[0] != x_test.shape[0]:
        raise _DataError(
            f"--test-labels: {y_test.shape[0]} rows do not match "
            f"the {x_test.shape[0]} test points"
        )
    if y_train.shape[1] != y_test.shape[1]:
        raise _DataError(
            f"--test-labels: width {y_test.shape[1]} does not match "
            f"train labels width {y_train.shape[1]}"
        )
    lams = _floats(args.lambdas, "--lambdas") if args.lambdas else list(lambda_grid())
    n_train = x_train.shape[0]
    stacked = np.vstack([x_train, x_test])
    start = time.perf_counter()
    if args.mode == "exact":
        dual = _dual_from_args(args)
        K = kernel_matrix(stacked, KernelConfig(args.depth, dual), args.which).entries
        result = ridge_regress(
            K[:n_train, :n_train], K[n_train:, :n_train], y_train, y_test, lams
        )
    else:
        kappa, kappa_prime = _embed_polynomials(args)
        cfg = EmbedConfig(
            kappa, kappa_prime, args.depth, args.sketch_dim, args.max_degree, args.seed
        )
        phi, psi = _embed_features(stacked, cfg)
        feats = psi if args.which == "ntk" else phi
        result = ridge_regress(
            feats[:, :n_train],
            feats[:, n_train:],
            y_train,
            y_test,
            lams,
            mode="feature",
        )
    payload = {
        "command": "regress",
        "mode": args.mode,
        "which": args.which,
        "depth": args.depth,
        "n_train": n_train,
        "n_test": x_test.shape[0],
        "seconds": round(time.perf_counter() - start, 6),
    }
    payload.update(_ridge_payload(result))
    _emit(payload, args.output)
    return 0


def _cmd_stat_dim(args) -> int:
    K = _load_matrix(args.input, "--input")
    lams = _floats(args.lambdas, "--lambdas")
    if not lams:
        raise _UsageError("--lambdas: at least one value required")
    values = []
    for lam in lams:
        if lam <= 0:
            raise _UsageError(f"--lambdas: values must be positive, got {lam}")
        values.append({"lambda": lam, "value": statistical_dimension(K, lam)})
    _emit({"command": "stat-dim", "n": K.shape[0], "results": values}, args.output)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common_activation(p, default=None):
    p.add_argument("--activation", required=default is None, default=default)
    p.add_argument("--params", default="", help="comma-separated activation parameters")


def _add_format(p):
    p.add_argument("--format", choices=("auto", "csv", "nke1"), default="auto")


def _build_parser() -> _Parser:
    parser = _Parser(prog="nke", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dual-eval", help="closed form vs quadrature for one dual kernel")
    _add_common_activation(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--quad-order", type=int, default=40)
    p.add_argument("--output", default=None, help="also write the JSON summary here")
    p.set_defaults(func=_cmd_dual_eval)

    p = sub.add_parser("kernel", help="exact NNGP/NTK Gram matrix of a dataset")
    _add_common_activation(p)
    p.add_argument("--which", choices=("ntk", "nngp"), default="ntk")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("embed", help="sketched NNGP/NTK feature maps of a dataset")
    _add_common_activation(p, default="normalized_gaussian")
    p.add_argument("--kappa-coeffs", default=None)
    p.add_argument("--degree", type=int, default=None, help="Taylor degree for kappa; defaults to --max-degree")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--sketch-dim", type=int, default=1024)
    p.add_argument("--max-degree", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", required=True)
    p.add_argument("--output-ntk", required=True)
    p.add_argument("--output-nngp", default=None)
    _add_format(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cntk", help="exact convolutional NTK matrix of images")
    _add_common_activation(p, default="normalized_gaussian")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--filter-size", type=int, default=3)
    p.add_argument("--pixel-budget", type=int, default=4096)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--output", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_cntk)

    p = sub.add_parser("cntk-embed", help="sketched convolutional NTK features")
    _add_common_activation(p, default="normalized_gaussian")
    p.add_argument("--kappa-coeffs", default=None)
    p.add_argument("--kappa-prime-coeffs", default=None)
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--filter-size", type=int, default=3)
    p.add_argument("--sketch-dim", type=int, default=1024)
    p.add_argument("--tangent-dim", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pixel-budget", type=int, default=4096)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--output", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_cntk_embed)

    p = sub.add_parser("bench-approx", help="Hermite truncation error decay study")
    _add_common_activation(p)
    p.add_argument("--degrees", required=True, help="N..M range or comma list")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--output", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_bench_approx)

    p = sub.add_parser("regress", help="ridge regression on exact or sketched NTK")
    _add_common_activation(p, default="normalized_gaussian")
    p.add_argument("--mode", choices=("exact", "embed"), default="exact")
    p.add_argument("--which", choices=("ntk", "nngp"), default="ntk")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--kappa-coeffs", default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--sketch-dim", type=int, default=1024)
    p.add_argument("--max-degree", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--lambdas", default=None, help="defaults to the 20-point grid")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("stat-dim", help="statistical dimension of a kernel matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--lambdas", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_stat_dim)

    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except NkeError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
