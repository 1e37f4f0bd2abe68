"""Command-line front end.

Subcommands: solve, compare, generate, validate, rate, audit.  Every
command echoes its resolved configuration as a single JSON line before
doing any work; for ``compare`` that line is a complete experiment spec
that reproduces the run via --spec-file.
"""

import argparse
import json
import sys
import warnings

import numpy as np

from .analysis import audit_trace, classify_rate
from .biochem import (NetworkObjective, check_mass_conservation,
                      generate_network, load_network, save_network)
from .exceptions import DcError, GenerationError, SchemaError
from .harness import (ExperimentSpec, ProblemSource, run_experiment)
from .inner import InnerConfig
from .problem import BUILTIN_PROBLEMS, builtin_problem
from .solver import (SolverConfig, Status, Variant, read_trace_csv, solve,
                     write_trace_csv)

__all__ = ("main",)

MODEL_DEFAULT_RHO = 100.0


def _echo(config):
    print(json.dumps(config))


def _solver_flags(parser):
    parser.add_argument("--variant", choices=[v.value for v in Variant],
                        default=Variant.BDCA_QI.value)
    parser.add_argument("--alpha", type=float, default=0.4)
    parser.add_argument("--beta", type=float, default=0.5)
    parser.add_argument("--lambda-bar", type=float, default=50.0)
    parser.add_argument("--lambda-max", type=float, default=200.0)
    parser.add_argument("--inner-tol", type=float, default=1e-8)


def _solver_config(args, variant=None, max_iters=None):
    return SolverConfig(
        variant=variant if variant is not None else args.variant,
        alpha=args.alpha,
        beta=args.beta,
        lambda_bar=args.lambda_bar,
        lambda_max=args.lambda_max,
        max_outer_iters=max_iters if max_iters is not None else 1000,
        inner=InnerConfig(tol_grad=args.inner_tol),
    )


# -- solve ---------------------------------------------------------------


def cmd_solve(args):
    if args.builtin is not None:
        problem = builtin_problem(args.builtin, rho=args.rho)
        source = {"builtin": args.builtin}
    else:
        try:
            network = load_network(args.model)
        except SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        rho = args.rho if args.rho is not None else MODEL_DEFAULT_RHO
        problem = NetworkObjective(network).as_dc_problem(rho=rho)
        source = {"model": args.model}

    if args.x0 is not None:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            print(f"error: cannot parse --x0 {args.x0!r}", file=sys.stderr)
            return 2
        if x0.size != problem.m:
            print(f"error: --x0 has {x0.size} entries, problem needs {problem.m}",
                  file=sys.stderr)
            return 2
        start = {"x0": x0.tolist()}
    else:
        rng = np.random.default_rng(args.x0_seed)
        x0 = rng.uniform(-2.0, 2.0, size=problem.m)
        start = {"x0_seed": args.x0_seed}

    try:
        cfg = _solver_config(args, max_iters=args.max_iters)
        if args.tol is not None:
            cfg.tol_d = cfg.tol_x = args.tol
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _echo({"command": "solve", "problem": source, "m": problem.m,
           "rho": problem.rho, "variant": cfg.variant.value,
           "alpha": cfg.alpha, "beta": cfg.beta,
           "lambda_bar": cfg.lambda_bar, "lambda_max": cfg.lambda_max,
           "max_iters": cfg.max_outer_iters,
           "tol_d": cfg.tol_d, "tol_x": cfg.tol_x,
           "inner_tol": cfg.inner.tol_grad, **start})

    result = solve(problem, x0, cfg)

    if args.trace_out:
        write_trace_csv(result.trace, args.trace_out)
        print(f"trace: {args.trace_out} ({len(result.trace)} rows)")
    final_d = result.trace[-1].norm_d if result.trace else float("nan")
    print(f"status: {result.status.value}")
    print(f"phi: {result.phi_final:.12g}")
    print(f"iterations: {result.iterations}")
    print(f"norm_d: {final_d:.6g}")
    if result.message:
        print(f"detail: {result.message}")
    return 1 if result.status.is_failure else 0


# -- compare -------------------------------------------------------------


def _parse_generate(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--generate wants m:n:seed, got {text!r}")
    m, n, seed = (int(p) for p in parts)
    return ProblemSource(kind="generate", m=m, n=n, seed=seed)


def cmd_compare(args):
    try:
        if args.spec_file is not None:
            with open(args.spec_file) as handle:
                spec = ExperimentSpec.from_json(json.load(handle))
        else:
            problems = [ProblemSource(kind="builtin", name=name)
                        for name in args.builtin or ()]
            problems += [ProblemSource(kind="model", path=path)
                         for path in args.model or ()]
            problems += [_parse_generate(text) for text in args.generate or ()]
            if not problems:
                print("error: no problems given (use --builtin/--model/--generate "
                      "or --spec-file)", file=sys.stderr)
                return 2
            spec = ExperimentSpec(
                problems=problems,
                trials=args.trials,
                seed=args.seed,
                bdca_iters=args.bdca_iters,
                dca_cap=args.dca_cap,
                rho=args.rho,
                solver=_solver_config(args),
            )
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _echo(spec.to_json())
    try:
        result = run_experiment(spec, out_dir=args.out)
    except (DcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    header = (f"{'name':<24}{'m':>5}{'n':>5}{'phi0':>12}{'phi_end':>12}"
              f"{'b_it':>8}{'b_t(s)':>9}{'d_it':>9}{'d_t(s)':>9}"
              f"{'r_it':>7}{'r_t':>7}")
    print(header)
    for row in result.rows:
        print(f"{row.name:<24}{row.m:>5}{row.n:>5}"
              f"{row.avg_phi0:>12.4g}{row.avg_phi_end:>12.4g}"
              f"{row.bdca_iters_avg:>8.1f}{row.bdca_time_avg:>9.3f}"
              f"{row.dca_iters_avg:>9.1f}{row.dca_time_avg:>9.3f}"
              f"{row.ratio_iters:>7.2f}{row.ratio_time:>7.2f}")
        if row.failures or row.dca_capped:
            print(f"  note: {row.failures} failed trials, "
                  f"{row.dca_capped} hit the plain-variant cap")
    if args.out:
        print(f"wrote {args.out}/rows.csv and per-trial traces")
    return 0


# -- generate / validate -------------------------------------------------


def cmd_generate(args):
    _echo({"command": "generate", "m": args.m, "n": args.n, "seed": args.seed,
           "out": args.out})
    try:
        network = generate_network(args.m, args.n, args.seed)
    except (ValueError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_network(network, args.out)
    residual, _ = check_mass_conservation(network)
    print(f"name: {network.name}")
    print(f"species: {network.m}, reactions: {network.n}")
    print(f"conservation residual: {residual:g}")
    return 0


def cmd_validate(args):
    _echo({"command": "validate", "model": args.model, "l_file": args.l_file})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            network = load_network(args.model)
        except SchemaError as exc:
            print(f"schema error: {exc}", file=sys.stderr)
            return 1
    for warning in caught:
        print(f"warning: {warning.message}")

    if args.l_file is not None:
        try:
            with open(args.l_file) as handle:
                masses = np.asarray(json.load(handle), dtype=float)
            residual, _ = check_mass_conservation(network, masses)
        except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
            print(f"schema error: l-file: {exc}", file=sys.stderr)
            return 1
    else:
        residual, _ = check_mass_conservation(network)

    print(f"name: {network.name or '(unnamed)'}")
    print(f"species: {network.m}, reactions: {network.n}")
    print(f"conservation residual: {residual:g}")
    if residual > 0:
        print("conservation warning: columns are not mass balanced")
        return 2
    return 0


# -- rate / audit --------------------------------------------------------


def cmd_rate(args):
    _echo({"command": "rate", "trace": args.trace, "column": args.column,
           "subtract_final": args.subtract_final, "atol": args.atol})
    import csv

    try:
        with open(args.trace, newline="") as handle:
            reader = csv.DictReader(handle)
            if args.column not in (reader.fieldnames or ()):
                print(f"error: column {args.column!r} not in {args.trace}",
                      file=sys.stderr)
                return 1
            values = [float(row[args.column]) for row in reader]
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    series = np.asarray(values, dtype=float)
    if args.subtract_final:
        series = series - series[-1]
    series = np.abs(series)
    try:
        report = classify_rate(series, atol=args.atol)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report.to_json()))
    return 0


def cmd_audit(args):
    _echo({"command": "audit", "trace": args.trace, "sigma_g": args.sigma_g,
           "sigma_h": args.sigma_h, "rho": args.rho, "alpha": args.alpha,
           "variant": args.variant, "tol_base": args.tol_base})
    try:
        trace = read_trace_csv(args.trace)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = SolverConfig(variant=args.variant, alpha=args.alpha)
    report = audit_trace(trace, (args.sigma_g, args.sigma_h, args.rho), cfg,
                         tol_base=args.tol_base)
    print(json.dumps(report.to_json()))
    return 0 if report.passed else 1


# -- parser --------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dcboost",
        description="DC solvers with boosted line searches, plus network "
                    "tooling and trace analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver on a problem")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=sorted(BUILTIN_PROBLEMS))
    src.add_argument("--model", help="model JSON file")
    _solver_flags(p)
    p.add_argument("--rho", type=float, default=None,
                   help="regularization (default: builtin's own, "
                        f"{MODEL_DEFAULT_RHO:g} for models)")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=None,
                   help="sets both direction and step stopping tolerances")
    p.add_argument("--x0", help="comma-separated start point")
    p.add_argument("--x0-seed", type=int, default=0,
                   help="seed for a uniform start in [-2, 2]^m")
    p.add_argument("--trace-out", help="write the iteration trace CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="matched-target comparison runs")
    p.add_argument("--spec-file", help="experiment spec JSON (as echoed)")
    p.add_argument("--builtin", action="append", choices=sorted(BUILTIN_PROBLEMS))
    p.add_argument("--model", action="append")
    p.add_argument("--generate", action="append", metavar="M:N:SEED")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bdca-iters", type=int, default=1000)
    p.add_argument("--dca-cap", type=int, default=None)
    p.add_argument("--rho", type=float, default=100.0)
    _solver_flags(p)
    p.add_argument("--out", help="directory for rows.csv, spec.json, traces/")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="make a synthetic conservative network")
    p.add_argument("--m", type=int, required=True, help="species count")
    p.add_argument("--n", type=int, required=True, help="reaction count")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="model JSON destination")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model")
    p.add_argument("--l-file", help="JSON list of positive species masses")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rate", help="classify a trace column's convergence")
    p.add_argument("trace")
    p.add_argument("--column", default="norm_d")
    p.add_argument("--subtract-final", action="store_true",
                   help="classify |s_k - s_last| instead of s_k")
    p.add_argument("--atol", type=float, default=None)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("audit", help="replay decrease inequalities on a trace")
    p.add_argument("trace")
    p.add_argument("--sigma-g", type=float, default=0.0)
    p.add_argument("--sigma-h", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--variant", choices=[v.value for v in Variant],
                   default=Variant.BDCA_QI.value)
    p.add_argument("--tol-base", type=float, default=1e-6)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
