"""Command-line front end.

Exit codes: 0 success, 2 bad input or flags, 3 solver did not converge (the
result document is still written, with residuals).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional

import numpy as np

from . import io as lio
from .core import (
    ConvergenceError,
    DegenerateProblemError,
    Hyperparams,
    InputError,
    Kind,
    SolverOptions,
)
from .joint import constant_solution_bounds, find_constancy_threshold, solve_joint
from .multivar import solve_cov_fit
from .reference import oracle_tv1d_dual
from .segmenter import extract_changepoints, refit_segments
from .synth import SCENARIOS, emit_scenario_doc, generate, scenario
from .tvdenoise import lambda_max_mean, solve_mean
from .variance import lambda_max_variance, solve_variance

log = logging.getLogger("l1seg")

OUTPUT_DIR_ENV = "L1SEG_OUTPUT_DIR"


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _out_path(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _write(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(_out_path(path), "w") as fh:
            fh.write(text)


def _load(args, columns: Optional[int]):
    """Return (data, seed, truth) from a file, stdin or a synthetic scenario."""
    if args.synth:
        if args.synth not in SCENARIOS:
            raise CliError(f"unknown scenario {args.synth!r}")
        sc = scenario(args.synth)
        data = generate(args.synth, args.seed, sc)
        return (data if data.ndim == 2 else data[:, None]), args.seed, sc
    if args.input is None:
        raise CliError("give an input file, '-' for stdin, or --synth SCENARIO")
    try:
        text = sys.stdin.read() if args.input == "-" else open(args.input).read()
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from exc
    return lio.parse_csv(text), None, None


def _scalar(data: np.ndarray, column: int) -> np.ndarray:
    if data.shape[1] == 1:
        return data[:, 0]
    if not 0 <= column < data.shape[1]:
        raise CliError(f"column {column + 1} requested but input has {data.shape[1]} columns")
    return data[:, column]


def _options(args) -> SolverOptions:
    kw = {}
    if getattr(args, "tolerance", None) is not None:
        kw["tolerance"] = args.tolerance
    if getattr(args, "max_iter", None) is not None:
        kw["max_iterations"] = args.max_iter
    if getattr(args, "rho", None) is not None:
        kw["penalty_parameter"] = args.rho
    return SolverOptions(**kw)


def _pick_lambda(absolute, relative, lam_max, name="lambda"):
    if absolute is not None:
        if absolute < 0:
            raise CliError(f"--{name} must be nonnegative")
        return float(absolute)
    if relative is None:
        raise CliError(f"give --{name} or --{name}-rel")
    if relative < 0:
        raise CliError(f"--{name}-rel must be nonnegative")
    if lam_max is None:
        raise CliError(f"--{name}-rel needs a lambda_max, which this command does not have")
    return float(relative) * lam_max


def _segments(y, levels, mode: Kind, delta):
    seg = extract_changepoints(levels, delta)
    refit = refit_segments(y, seg, mode)
    segs = [
        {"start": s, "end": e, "level": lv, "refit_level": rv}
        for (s, e), lv, rv in zip(seg.segment_bounds, seg.segment_levels, refit.segment_levels)
    ]
    return list(seg.changepoints), segs


def _report_fields(report):
    return {
        "objective": report.objective,
        "iterations": report.iterations,
        "kkt_residual": report.kkt_residual,
        "solver_name": report.solver_name,
        "converged": report.converged,
        "floor_active": report.floor_active,
    }


def _emit_plot(path, y, levels, truth=None):
    t = np.arange(1, len(y) + 1)
    header, cols = ["t", "y", "level"], [t, y, levels]
    if truth is not None:
        header.append("truth")
        cols.append(truth)
    lio.write_table(_out_path(path), header, cols)


# ---------------------------------------------------------------- mean / var

def _prepare_var(y, args):
    if args.center == "mean":
        y = y - y.mean()
    elif args.center == "tv":
        lam = args.center_lambda_rel * lambda_max_mean(y)
        y = y - solve_mean(y, lam)[0].levels
    if args.winsorize is not None:
        if not 0 < args.winsorize <= 1:
            raise CliError("--winsorize must be in (0, 1]")
        cap = np.quantile(np.abs(y), args.winsorize)
        y = np.clip(y, -cap, cap)
    return y


def _solve_scalar(problem: str, y, lam, args, opts):
    """Run one mean/var solve and return (levels, report-like dict, converged)."""
    if problem == "mean":
        z = y
    else:
        z = y**2
    if args.solver == "oracle":
        try:
            sig = oracle_tv1d_dual(z, lam, tol=getattr(args, "oracle_tol", 1e-7))
        except ConvergenceError as exc:
            return None, {"error": str(exc), "solver_name": "dual-pg", "converged": False}, False
        levels = sig.levels
        if problem == "var":
            levels = np.maximum(levels, opts.floor_for(y))
        from .tvdenoise import kkt_residual_mean, mean_objective
        kkt = kkt_residual_mean(z, levels, lam).worst
        rep = {"objective": mean_objective(z, levels, lam), "iterations": None,
               "kkt_residual": kkt, "solver_name": "dual-pg", "converged": True,
               "floor_active": False}
        return levels, rep, True
    if problem == "mean":
        sig, report = solve_mean(y, lam, tolerance=opts.tolerance)
    else:
        sig, report = solve_variance(y, lam, opts)
    return sig.levels, _report_fields(report), report.converged


def _scalar_doc(problem, y, lam, lam_max, args, opts, seed, truth):
    levels, rep, ok = _solve_scalar(problem, y, lam, args, opts)
    doc = {"problem": problem, "n": int(len(y)), "lambda": lam, "lambda_max": lam_max}
    if levels is not None:
        mode = Kind.MEAN if problem == "mean" else Kind.VARIANCE
        cps, segs = _segments(y, levels, mode, args.delta)
        doc.update(levels=levels, changepoints=cps, segments=segs)
    doc.update(rep)
    if seed is not None:
        doc["seed"] = seed
    return doc, levels, ok


def cmd_scalar(args, problem: str) -> int:
    data, seed, sc = _load(args, None)
    y = _scalar(data, args.column - 1)
    if len(y) < 2:
        raise CliError("need at least 2 samples")
    opts = _options(args)
    if problem == "var":
        y = _prepare_var(y, args)
        lam_max = lambda_max_variance(y)
    else:
        lam_max = lambda_max_mean(y)
    lam = _pick_lambda(args.lam, args.lambda_rel, lam_max)
    doc, levels, ok = _scalar_doc(problem, y, lam, lam_max, args, opts, seed, sc)
    _write(lio.dump_document(doc), args.output)
    if args.emit_plot and levels is not None:
        truth = None
        if sc is not None:
            truth = sc.mean if problem == "mean" else sc.variance
        _emit_plot(args.emit_plot, y, levels, truth)
    return 0 if ok else 3


# -------------------------------------------------------------------- joint

def cmd_joint(args) -> int:
    data, seed, sc = _load(args, None)
    y = _scalar(data, args.column - 1)
    if len(y) < 2:
        raise CliError("need at least 2 samples")
    opts = _options(args)
    b1, b2 = constant_solution_bounds(y)
    lam1 = _pick_lambda(args.lambda1, args.lambda1_rel, b1, "lambda1")
    lam2 = _pick_lambda(args.lambda2, args.lambda2_rel, b2, "lambda2")
    try:
        est, report = solve_joint(y, Hyperparams(lam1, lam2), opts)
    except DegenerateProblemError as exc:
        raise CliError(str(exc)) from exc
    m, s2 = est.m, est.sigma2
    cps_m, segs_m = _segments(y, m, Kind.MEAN, args.delta)
    cps_v, segs_v = _segments(y - m, s2, Kind.VARIANCE, args.delta)
    doc = {
        "problem": "joint", "n": int(len(y)),
        "lambda": {"lambda1": lam1, "lambda2": lam2},
        "lambda_max": {"lambda1": b1, "lambda2": b2},
        "levels": {"mean": m, "variance": s2, "mu": est.mu.levels, "eta": est.eta.levels},
        "changepoints": {"mean": cps_m, "variance": cps_v},
        "segments": {"mean": segs_m, "variance": segs_v},
        **_report_fields(report),
    }
    if seed is not None:
        doc["seed"] = seed
    _write(lio.dump_document(doc), args.output)
    if args.emit_plot:
        _emit_plot(args.emit_plot, y, m, None if sc is None else sc.mean)
    return 0 if report.converged else 3


def cmd_joint_threshold(args) -> int:
    data, seed, _ = _load(args, None)
    y = _scalar(data, args.column - 1)
    try:
        thr = find_constancy_threshold(y, args.which, args.other, _options(args), rel_tol=args.rel_tol)
    except DegenerateProblemError as exc:
        raise CliError(str(exc)) from exc
    doc = {"problem": "joint-threshold", "method": "numerical bisection", "which": args.which,
           "other_lambda": args.other, "threshold": thr, "n": int(len(y))}
    if seed is not None:
        doc["seed"] = seed
    _write(lio.dump_document(doc), args.output)
    return 0


# ---------------------------------------------------------------------- cov

def cmd_cov(args) -> int:
    data, seed, sc = _load(args, None)
    if data.shape[0] < 2:
        raise CliError("need at least 2 samples")
    lam = _pick_lambda(args.lam, args.lambda_rel, None)
    covs, report = solve_cov_fit(data, lam, _options(args))
    mats = covs.matrices
    flat = mats.reshape(len(mats), -1)
    jumps = np.linalg.norm(np.diff(flat, axis=0), axis=1)
    delta = args.delta if args.delta is not None else 1e-6 * (float(np.max(jumps, initial=0.0)) + 1e-300)
    cps = [int(k) + 1 for k in np.flatnonzero(jumps > delta)]
    bounds = [0] + cps + [len(mats)]
    outer = np.einsum("ti,tj->tij", data, data)
    segs = [{"start": a + 1, "end": b, "level": mats[a:b].mean(axis=0),
             "refit_level": outer[a:b].mean(axis=0)} for a, b in zip(bounds[:-1], bounds[1:])]
    doc = {"problem": "cov", "n": int(len(data)), "dim": int(data.shape[1]), "lambda": lam,
           "lambda_max": None, "levels": mats, "changepoints": cps, "segments": segs,
           **_report_fields(report)}
    if seed is not None:
        doc["seed"] = seed
    _write(lio.dump_document(doc), args.output)
    return 0 if report.converged else 3


# --------------------------------------------------------------------- path

def _parse_grid(text: str):
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        lo, hi, count = text.split(":")
        count = int(count)
        if count <= 0:
            return []
        return list(np.geomspace(float(lo), float(hi), count))
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_path(args) -> int:
    data, seed, sc = _load(args, None)
    y = _scalar(data, args.column - 1)
    if len(y) < 2:
        raise CliError("need at least 2 samples")
    opts = _options(args)
    problem = args.problem
    if problem == "var":
        y = _prepare_var(y, args)
        lam_max = lambda_max_variance(y)
    else:
        lam_max = lambda_max_mean(y)
    try:
        if args.grid is not None:
            lams = _parse_grid(args.grid)
        else:
            lams = [r * lam_max for r in _parse_grid(args.grid_rel)]
    except ValueError as exc:
        raise CliError(f"bad grid: {exc}") from exc
    if not lams:
        raise CliError("empty lambda grid")
    if any(l < 0 for l in lams):
        raise CliError("grid values must be nonnegative")
    results, summary, ok = [], [], True
    for lam in lams:
        doc, _, good = _scalar_doc(problem, y, lam, lam_max, args, opts, None, sc)
        ok &= good
        results.append(doc)
        summary.append({"lambda": lam, "n_changepoints": len(doc.get("changepoints", [])),
                        "objective": doc.get("objective")})
    counts = [s["n_changepoints"] for s in sorted(summary, key=lambda s: s["lambda"])]
    out = {"problem": problem, "n": int(len(y)), "lambda_max": lam_max,
           "summary": summary,
           "changepoints_monotone": all(a >= b for a, b in zip(counts, counts[1:])),
           "results": results}
    if seed is not None:
        out["seed"] = seed
    _write(lio.dump_document(out), args.output)
    return 0 if ok else 3


# -------------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    if args.scenario not in SCENARIOS:
        raise CliError(f"unknown scenario {args.scenario!r}; choose from {sorted(SCENARIOS)}")
    _write(lio.emit_csv(generate(args.scenario, args.seed)), args.output)
    if args.truth:
        _write(lio.dump_document(emit_scenario_doc(args.scenario, args.seed)), args.truth)
    return 0


# ------------------------------------------------------------------- parser

def _add_input(p):
    p.add_argument("input", nargs="?", help="CSV file, one sample per row ('-' for stdin)")
    p.add_argument("--synth", metavar="SCENARIO", help="use a synthetic scenario instead of a file")
    p.add_argument("--seed", type=int, default=0, help="seed for --synth (default 0)")
    p.add_argument("--column", type=int, default=1, help="1-based column for scalar commands")
    p.add_argument("-o", "--output", help=f"result document path (default stdout; relative paths go under ${OUTPUT_DIR_ENV} if set)")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--delta", type=float, help="changepoint threshold on level differences")


def _add_lambda(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="absolute penalty weight")
    g.add_argument("--lambda-rel", type=float, help="penalty as a multiple of lambda_max")


def _add_var_flags(p):
    p.add_argument("--center", choices=("none", "mean", "tv"), default="none",
                   help="remove the mean first: empirical mean or an l1 mean-filter pre-pass")
    p.add_argument("--center-lambda-rel", type=float, default=0.1)
    p.add_argument("--winsorize", type=float, metavar="Q",
                   help="clip |y| at its Q-quantile before squaring")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1seg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("mean", "piecewise-constant mean"), ("var", "piecewise-constant variance")):
        p = sub.add_parser(name, help=helptext)
        _add_input(p)
        _add_lambda(p)
        p.add_argument("--solver", choices=("fast", "oracle"), default="fast")
        p.add_argument("--emit-plot", metavar="FILE")
        if name == "var":
            _add_var_flags(p)
        p.set_defaults(func=lambda a, _n=name: cmd_scalar(a, _n))

    p = sub.add_parser("joint", help="joint mean and variance in canonical parameters")
    _add_input(p)
    g1 = p.add_mutually_exclusive_group()
    g1.add_argument("--lambda1", type=float)
    g1.add_argument("--lambda1-rel", type=float)
    g2 = p.add_mutually_exclusive_group()
    g2.add_argument("--lambda2", type=float)
    g2.add_argument("--lambda2-rel", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--emit-plot", metavar="FILE")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("joint-threshold", help="numerical bisection for the joint constancy threshold")
    _add_input(p)
    p.add_argument("--which", choices=("mu", "eta"), required=True)
    p.add_argument("--other", type=float, required=True, help="the penalty held fixed")
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_joint_threshold)

    p = sub.add_parser("cov", help="covariance matrix fitting, n-column input")
    _add_input(p)
    _add_lambda(p)
    p.add_argument("--rho", type=float)
    p.set_defaults(func=cmd_cov)

    p = sub.add_parser("path", help="sweep a lambda grid for mean or var")
    p.add_argument("problem", choices=("mean", "var"))
    _add_input(p)
    p.add_argument("--grid-rel", default="0.01:1:20",
                   help="relative grid 'lo:hi:count' (log-spaced) or comma list (default 0.01:1:20)")
    p.add_argument("--grid", help="absolute lambda values, comma list or 'lo:hi:count'")
    p.add_argument("--solver", choices=("fast", "oracle"), default="fast")
    _add_var_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("synth", help="write a synthetic data set as CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.add_argument("--truth", metavar="FILE", help="also write the true levels as a JSON document")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"l1seg: error: {exc}", file=sys.stderr)
        return exc.code
    except InputError as exc:
        print(f"l1seg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
