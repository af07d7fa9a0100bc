"""Command-line front end: ``python -m ciq <command> ...``.

Machine-readable results go to stdout (or ``--out``); diagnostics go to
stderr. Exit codes: 0 success, 1 usage or I/O error, 2 solver did not
converge (results are still written).
"""
import argparse
import csv
import json
import sys

import numpy as np

from . import io as ciq_io
from .ciq import invsqrt_apply, precond_sample_rotated, precond_whiten_rotated, sqrt_apply
from .lanczos import SpectrumEstimate, estimate_extreme_eigenvalues
from .linop import KERNELS, DenseOperator, KernelOperator
from .msminres import DEFAULT_MAX_ITERS, DEFAULT_TOL, SolverConfig
from .oracle import DECAYS, dense_sqrt_apply, make_spectrum_matrix
from .precond import build_preconditioner
from .quadrature import build_rule

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2
ORACLE_CAP = 1024
VERIFY_CAP = 512


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this tool reserves 2 for non-convergence.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(*args):
    print(*args, file=sys.stderr)


def _solver_flags(p):
    p.add_argument("--Q", type=int, default=8, help="quadrature nodes (default 8)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative residual tolerance")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS, help="msMINRES iteration cap")
    p.add_argument("--lanczos-iters", type=int, default=10, help="Lanczos steps for the spectrum estimate")
    p.add_argument("--seed", type=int, default=0)


def _kernel_flags(p):
    p.add_argument("--kernel", choices=KERNELS, help="build K from a kernel on --points")
    p.add_argument("--points", help="CSV of points, one per row")
    p.add_argument("--lengthscale", type=float, default=1.0)
    p.add_argument("--outputscale", type=float, default=1.0, help="kernel variance")
    p.add_argument("--jitter", type=float, default=None, help="diagonal added to K (default 1e-4 * outputscale)")


def _operator(args):
    if args.matrix and args.kernel:
        raise UsageError("give either --matrix or --kernel/--points, not both")
    if args.matrix:
        return DenseOperator(ciq_io.read_matrix_market(args.matrix))
    if args.kernel:
        if not args.points:
            raise UsageError("--kernel needs --points")
        pts = ciq_io.read_points_csv(args.points)
        return KernelOperator(pts, args.kernel, args.lengthscale, args.outputscale, args.jitter)
    raise UsageError("need --matrix or --kernel with --points")


def _config(args):
    if args.Q < 1:
        raise UsageError("--Q must be at least 1")
    try:
        return SolverConfig(tol=args.tol, max_iters=args.max_iters, verify=getattr(args, "verify", False))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write(args, text):
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_apply(args):
    op = _operator(args)
    cfg = _config(args)
    if not args.vector:
        raise UsageError("apply needs --vector")
    b = ciq_io.read_vector(args.vector)
    if b.size != op.dim:
        raise UsageError(f"vector has {b.size} entries but the operator has dimension {op.dim}")
    common = dict(Q=args.Q, cfg=cfg, lanczos_iters=args.lanczos_iters, seed=args.seed)
    if args.precond_rank:
        P = build_preconditioner(op, args.precond_rank)
        fn = precond_sample_rotated if args.power == "sqrt" else precond_whiten_rotated
        result, out = fn(op, P, b, return_output=True, **common)
        _log(f"preconditioned (rank {P.rank}): output is the rotated root R b, not the principal root")
    else:
        fn = sqrt_apply if args.power == "sqrt" else invsqrt_apply
        out = fn(op, b, **common)
        result = out.result
    _write(args, ciq_io.format_vector(result))
    rel = out.bundle.relative_residuals
    _log(f"J={out.iterations} Q={out.rule.Q} mvms={op.mvm_count} "
         f"kappa_est={out.spectrum.kappa:.4g} max_rel_residual={np.max(rel):.3e} converged={out.converged}")
    if args.verify and not args.precond_rank:
        if op.dim > VERIFY_CAP:
            _log(f"verify: oracle check skipped (N={op.dim} > {VERIFY_CAP})")
        else:
            ref = dense_sqrt_apply(op.to_dense(), b, 0.5 if args.power == "sqrt" else -0.5)
            _log(f"verify: relative error vs dense oracle {np.linalg.norm(result - ref) / np.linalg.norm(ref):.3e}")
    return EXIT_OK if out.converged else EXIT_NONCONVERGED


def _parse_range(text):
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",")]


def _bench_matrix(args, rng):
    if args.kernel:
        if args.points:
            pts = ciq_io.read_points_csv(args.points)
        else:
            pts = rng.uniform(0.0, 1.0, (args.N, 2))
        op = KernelOperator(pts, args.kernel, args.lengthscale, args.outputscale, args.jitter)
        return op.to_dense(), args.kernel
    return make_spectrum_matrix(args.N, args.decay, seed=args.seed), args.decay


def cmd_bench_accuracy(args):
    if args.N > ORACLE_CAP:
        raise UsageError(f"N={args.N} exceeds the dense-oracle cap of {ORACLE_CAP}")
    rng = np.random.default_rng(args.seed)
    K, label = _bench_matrix(args, rng)
    N = K.shape[0]
    if N > ORACLE_CAP:
        raise UsageError(f"N={N} exceeds the dense-oracle cap of {ORACLE_CAP}")
    b = rng.standard_normal(N)
    power = 0.5 if args.power == "sqrt" else -0.5
    ref = dense_sqrt_apply(K, b, power)
    tols = [float(t) for t in args.tols.split(",")] if args.tols else [args.tol]
    rows = []
    status = EXIT_OK
    op = DenseOperator(K)
    spectrum = estimate_extreme_eigenvalues(op, iters=args.lanczos_iters, seed=args.seed)
    for tol in tols:
        cfg = SolverConfig(tol=tol, max_iters=args.max_iters)
        for Q in _parse_range(args.Q_range):
            op.reset_mvm_count()
            fn = sqrt_apply if power > 0 else invsqrt_apply
            out = fn(op, b, Q, cfg, spectrum=spectrum)
            err = np.linalg.norm(out.result - ref) / np.linalg.norm(ref)
            rows.append([N, label, Q, tol, f"{err:.6e}", out.iterations, op.mvm_count])
            if not out.converged:
                status = EXIT_NONCONVERGED
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "decay", "Q", "tol", "relative_error", "iterations", "mvms"])
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    _log(f"spectrum estimate [{spectrum.lambda_min:.4g}, {spectrum.lambda_max:.4g}] from {args.lanczos_iters} Lanczos steps")
    return status


def cmd_sample(args):
    rng = np.random.default_rng(args.seed)
    if args.matrix or args.kernel:
        op = _operator(args)
    else:
        op = DenseOperator(make_spectrum_matrix(args.N, args.decay, seed=args.seed))
    cfg = _config(args)
    eps = rng.standard_normal((op.dim, args.n_samples))
    if args.precond_rank:
        P = build_preconditioner(op, args.precond_rank)
        S, out = precond_sample_rotated(op, P, eps, args.Q, cfg, lanczos_iters=args.lanczos_iters,
                                        seed=args.seed, return_output=True)
    else:
        out = sqrt_apply(op, eps, args.Q, cfg, lanczos_iters=args.lanczos_iters, seed=args.seed)
        S = out.result
    rows = [["method", "N", "n_samples", "relative_covariance_error"]]
    if op.dim <= ORACLE_CAP:
        K = op.to_dense()
        cov_err = lambda X: np.linalg.norm(X @ X.T / X.shape[1] - K) / np.linalg.norm(K)  # noqa: E731
        rows.append(["ciq", op.dim, args.n_samples, f"{cov_err(S):.6e}"])
        eps2 = np.random.default_rng(args.seed + 1).standard_normal((op.dim, args.n_samples))
        rows.append(["dense_oracle", op.dim, args.n_samples, f"{cov_err(dense_sqrt_apply(K, eps2, 0.5)):.6e}"])
    else:
        _log(f"N={op.dim} exceeds the oracle cap; covariance errors not computed")
    if args.samples_out:
        np.savetxt(args.samples_out, S.T, delimiter=",")
    _write(args, "".join(",".join(str(x) for x in r) + "\n" for r in rows))
    _log(f"max iterations {np.max(out.iterations)}, converged={out.converged}")
    return EXIT_OK if out.converged else EXIT_NONCONVERGED


def cmd_gibbs(args):
    from .apps.superres import SuperResConfig, run_superres

    cfg = SuperResConfig(truth_path=args.image, n_low=args.n_low, n_images=args.n_images,
                         sweeps=args.sweeps, burn_in=args.burn_in, Q=args.Q, tol=args.tol,
                         max_iters=args.max_iters, cg_tol=args.cg_tol, seed=args.seed, out_mean=args.out,
                         log_path=args.log)
    if cfg.burn_in >= cfg.sweeps:
        raise UsageError("--burn-in must be smaller than --sweeps")
    res = run_superres(cfg)
    summary = {"psnr": res.psnr, "baseline_psnr": res.baseline_psnr, "sweeps": cfg.sweeps,
               "burn_in": cfg.burn_in, "gamma_obs_mean": float(res.gamma_obs[cfg.burn_in:].mean()),
               "gamma_prior_mean": float(res.gamma_prior[cfg.burn_in:].mean()),
               "finite": res.finite, "elapsed_seconds": res.elapsed}
    print(json.dumps(summary))
    _log(f"posterior-mean PSNR {res.psnr:.2f} dB vs nearest-neighbor {res.baseline_psnr:.2f} dB "
         f"in {res.elapsed:.1f}s")
    converged = all(rec["converged"] for rec in res.log)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_thompson(args):
    from .apps.thompson import ThompsonProblem, thompson_step, toy_problem

    if args.train or args.candidates:
        if not (args.train and args.candidates):
            raise UsageError("--train and --candidates go together")
        X, y = ciq_io.read_xy_csv(args.train)
        cand = ciq_io.read_points_csv(args.candidates)
        problem = ThompsonProblem(X, y, cand, kernel=args.kernel or "rbf", lengthscale=args.lengthscale,
                                  outputscale=args.outputscale, noise=args.noise, jitter=args.jitter)
    else:
        problem = toy_problem(seed=args.seed)
    res = thompson_step(problem, args.n_samples, args.Q, _config(args), seed=args.seed,
                        lanczos_iters=args.lanczos_iters)
    _write(args, "".join(f"{i}\n" for i in res.indices))
    counts = np.bincount(res.indices, minlength=len(problem.candidates))
    _log(f"{args.n_samples} samples over {len(problem.candidates)} candidates; most chosen index "
         f"{int(np.argmax(counts))} ({counts.max()} times); converged={res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_rule(args):
    if not (0 < args.lambda_min <= args.lambda_max):
        raise UsageError("need 0 < --lambda-min <= --lambda-max")
    rule = build_rule(SpectrumEstimate.exact(args.lambda_min, args.lambda_max), args.Q)
    _write(args, rule.to_table())
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="ciq", description="Matrix square roots by contour integral quadrature.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("apply", help="write K^{1/2} b or K^{-1/2} b")
    p.add_argument("--matrix", help="MatrixMarket file holding K")
    _kernel_flags(p)
    p.add_argument("--vector", help="file of whitespace-separated reals")
    p.add_argument("--power", choices=("sqrt", "invsqrt"), default="sqrt")
    p.add_argument("--precond-rank", type=int, default=0,
                   help="pivoted-Cholesky rank; >0 returns a rotated root R b with R R^T = K^{+-1}")
    p.add_argument("--verify", action="store_true", help="recompute residuals; oracle check when N <= 512")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("bench-accuracy", help="CSV of error vs Q against the dense oracle")
    p.add_argument("--decay", choices=DECAYS, default="inv_square")
    p.add_argument("--kernel", choices=KERNELS, help="use a kernel matrix instead of a decay family")
    p.add_argument("--points")
    p.add_argument("--lengthscale", type=float, default=0.3)
    p.add_argument("--outputscale", type=float, default=1.0)
    p.add_argument("--jitter", type=float, default=None)
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--Q-range", default="1:16", help="lo:hi or comma list")
    p.add_argument("--tols", help="comma list of tolerances (overrides --tol)")
    p.add_argument("--power", choices=("sqrt", "invsqrt"), default="sqrt")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_bench_accuracy)

    p = sub.add_parser("sample", help="draw N(0, K) samples and report covariance error")
    p.add_argument("--matrix")
    _kernel_flags(p)
    p.add_argument("--decay", choices=DECAYS, default="inv_linear")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--n-samples", type=int, default=2000)
    p.add_argument("--precond-rank", type=int, default=0)
    p.add_argument("--samples-out", help="CSV file for the samples, one per row")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("gibbs", help="super-resolution Gibbs sampler")
    p.add_argument("--image", help="truth PGM (default: bundled 32x32 image)")
    p.add_argument("--n-low", type=int, default=16)
    p.add_argument("--n-images", type=int, default=4)
    p.add_argument("--sweeps", type=int, default=300)
    p.add_argument("--burn-in", type=int, default=60)
    p.add_argument("--cg-tol", type=float, default=1e-3, help="CG tolerance for the posterior mean")
    p.add_argument("--log", help="JSONL file of per-sweep diagnostics")
    p.add_argument("--out", help="posterior-mean PGM")
    _solver_flags(p)
    p.set_defaults(func=cmd_gibbs, Q=15)

    p = sub.add_parser("thompson", help="one Thompson-sampling step")
    p.add_argument("--train", help="CSV: input columns then target")
    p.add_argument("--candidates", help="CSV of candidate points")
    p.add_argument("--kernel", choices=KERNELS)
    p.add_argument("--lengthscale", type=float, default=0.2)
    p.add_argument("--outputscale", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=1e-2)
    p.add_argument("--jitter", type=float, default=None)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_thompson, Q=15)

    p = sub.add_parser("rule", help="print the quadrature table for a spectrum interval")
    p.add_argument("--lambda-min", type=float, required=True)
    p.add_argument("--lambda-max", type=float, required=True)
    p.add_argument("--Q", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rule)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"ciq {args.command}: error: {exc}")
        return EXIT_USAGE
    except (OSError, ciq_io.FormatError) as exc:
        _log(f"ciq {args.command}: I/O error: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        _log(f"ciq {args.command}: error: {exc}")
        return EXIT_USAGE
