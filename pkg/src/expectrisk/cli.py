"""Command-line interface.

Subcommands: ``expectile`` (static risk functionals of a CSV sample),
``regress`` (kernel expectile regression), ``nested`` (nested
expectiles of lattices / random walks, optional drift-convergence
study), ``hjb`` (risk-averse PDE solve, optional policy simulation).

Conventions: data to files or stdout, diagnostics to stderr; exit code
0 on success, 1 on usage errors (bad flags, missing or malformed
inputs), 2 on numerical failures.  Floats are serialized with 17
significant digits so round-trips are exact, and runs are
deterministic given flags and seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

import numpy as np

from . import hjb as hjb_mod
from . import lattice as lattice_mod
from .distributions import EmpiricalDistribution
from .errors import ConvergenceError, NumericalError, RateClampWarning
from .expectiles import expectile
from .regression import (
    GaussianKernel,
    KernelExpectileRegression,
    LaplaceKernel,
    PolynomialKernel,
    median_pairwise_bandwidth,
)
from .risk_measures import (
    average_value_at_risk,
    check_comparison_bounds,
    enveloping_spectrum,
    spectral_risk,
    value_at_risk,
)

USAGE_ERROR = 1
NUMERICAL_ERROR = 2


def fmt(x) -> str:
    return f"{float(x):.17g}"


class CliError(Exception):
    """Usage-level failure: bad input file, malformed CSV, bad parameters."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CliError(f"{path}: empty file, a header row is required")
            rows = list(reader)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    return [h.strip() for h in header], rows


def _numeric_column(path: str, header: list[str], rows: list[list[str]], name: str) -> np.ndarray:
    if name not in header:
        raise CliError(f"{path}: no column named {name!r} (have {header})")
    j = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CliError(f"{path}: line {i + 2}: expected {len(header)} fields, got {len(row)}")
        try:
            out[i] = float(row[j])
        except ValueError:
            raise CliError(f"{path}: line {i + 2}: {row[j]!r} in column {name!r} is not numeric")
    return out


def _write_report(report: dict, output, out_format: str):
    if out_format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        lines = ["key,value"]
        for key, value in report.items():
            if isinstance(value, float):
                value = fmt(value)
            lines.append(f"{key},{value}")
        text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def _cmd_expectile(args) -> int:
    header, rows = _read_csv(args.data)
    if not rows:
        raise CliError(f"{args.data}: no data rows")
    value_col = args.value_column or (header[0] if len(header) == 1 else "value")
    values = _numeric_column(args.data, header, rows, value_col)
    weights = (
        _numeric_column(args.data, header, rows, args.weight_column)
        if args.weight_column
        else None
    )
    try:
        dist = EmpiricalDistribution(values, weights)
        a = args.alpha
        report = {
            "alpha": a,
            "n_atoms": dist.size,
            "mean": dist.mean,
            "expectile": expectile(dist, a),
            "value_at_risk": value_at_risk(dist, a),
            "average_value_at_risk": average_value_at_risk(dist, a),
        }
        if a > 0.5:
            report["enveloping_spectral"] = spectral_risk(dist, enveloping_spectrum(a))
        else:
            report["enveloping_spectral"] = None
        bounds = check_comparison_bounds(dist, a)
        report.update(
            {
                "nonnegative": bounds.nonnegative,
                "bound_expectile_below_avar": bounds.expectile_below_avar,
                "bound_avar_band": bounds.avar_band,
                "bound_avar_below_scaled_expectile": bounds.avar_below_scaled_expectile,
                "bound_mean_ratio": bounds.mean_ratio_bound,
            }
        )
    except ValueError as exc:
        raise CliError(str(exc))
    _write_report(report, args.output, args.format)
    return 0


# ---------------------------------------------------------------------------


def _make_kernel(args):
    if args.kernel == "gaussian":
        return GaussianKernel(args.bandwidth) if args.bandwidth else None
    if args.kernel == "laplace":
        return LaplaceKernel(args.scale or 1.0)
    if args.kernel == "polynomial":
        return PolynomialKernel(args.degree or 2, args.offset or 0.0)
    raise CliError(f"unknown kernel {args.kernel!r}")


def _cmd_regress(args) -> int:
    header, rows = _read_csv(args.data)
    if not rows:
        raise CliError(f"{args.data}: no data rows")
    target_col = args.target_column or header[-1]
    y = _numeric_column(args.data, header, rows, target_col)
    feature_cols = [h for h in header if h != target_col]
    if not feature_cols:
        raise CliError(f"{args.data}: need at least one feature column besides {target_col!r}")
    X = np.column_stack([_numeric_column(args.data, header, rows, h) for h in feature_cols])

    support = None
    if args.support_file:
        sup_header, sup_rows = _read_csv(args.support_file)
        support = np.column_stack(
            [_numeric_column(args.support_file, sup_header, sup_rows, h) for h in sup_header]
        )
        if support.shape[1] != X.shape[1]:
            raise CliError("support file dimension does not match the feature columns")

    try:
        kernel = _make_kernel(args)
    except ValueError as exc:
        raise CliError(str(exc))

    est = KernelExpectileRegression(
        alpha=args.alpha, lam=args.lam, kernel=kernel, support_points=support,
        max_iter=args.max_iter,
    )
    exit_code = 0
    try:
        est.fit(X, y)
        report = est.report_
    except ConvergenceError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        est.kernel_ = est.kernel if est.kernel is not None else GaussianKernel(
            median_pairwise_bandwidth(X)
        )
        est.support_points_ = support if support is not None else X
        est.weights_ = exc.weights
        est.n_features_in_ = X.shape[1]
        report = exc.report
        exit_code = NUMERICAL_ERROR
    except ValueError as exc:
        raise CliError(str(exc))

    with open(args.model_out, "w", encoding="utf-8") as fh:
        fh.write(est.to_json())
    fitted = est.predict(X)
    with open(args.fitted_out, "w", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(feature_cols + [target_col, "fitted", "residual_sign"])
        for i in range(X.shape[0]):
            sign = 1 if y[i] >= fitted[i] else -1
            writer.writerow(
                [fmt(v) for v in X[i]] + [fmt(y[i]), fmt(fitted[i]), str(sign)]
            )
    print(
        json.dumps(
            {
                "iterations": report.iterations,
                "residual_norm": report.residual_norm,
                "active_set_stable": report.active_set_stable,
                "objective": report.objective,
                "converged": report.converged,
            }
        )
    )
    return exit_code


# ---------------------------------------------------------------------------


def _nested_rate(args) -> lattice_mod.RiskRate:
    if args.beta_family == "constant":
        return lattice_mod.RiskRate(args.beta)
    if args.beta_family == "linear-time":
        slope = args.beta

        def beta_fn(t, x, slope=slope):
            return np.full_like(np.asarray(x, dtype=float), slope * t)

        return lattice_mod.RiskRate(beta_fn, state_independent=True)
    raise CliError(f"unknown rate family {args.beta_family!r}")


def _cmd_nested(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RateClampWarning)
        if args.convergence:
            steps = [int(s) for s in args.step_counts.split(",")]
            if args.beta_family == "linear-time":
                beta = lambda t: args.beta * t  # noqa: E731
            else:
                beta = args.beta
            rows = lattice_mod.verify_drift_convergence(
                beta, args.horizon, steps, x0=args.x0,
                quad_nodes=args.quad_nodes, spacing=args.spacing,
            )
            lines = ["steps,dt,nested_value,target,abs_error"]
            for r in rows:
                lines.append(
                    f"{r.steps},{fmt(r.dt)},{fmt(r.value)},{fmt(r.target)},{fmt(r.error)}"
                )
            text = "\n".join(lines) + "\n"
            if args.output:
                with open(args.output, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
        else:
            if args.lattice:
                try:
                    with open(args.lattice, encoding="utf-8") as fh:
                        process = lattice_mod.lattice_from_json(fh.read())
                except (OSError, ValueError, KeyError) as exc:
                    raise CliError(f"cannot load lattice: {exc}")
            else:
                process = lattice_mod.build_random_walk_lattice(
                    args.x0, args.horizon, args.steps,
                    quad_nodes=args.quad_nodes or 7,
                    spacing=args.spacing or 0.25,
                )
            value = lattice_mod.nested_expectile(process, _nested_rate(args))
            report = {
                "nested_expectile": value,
                "initial_value": process.initial_value,
                "steps": process.n_steps,
            }
            _write_report(report, args.output, args.format)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------


def _cmd_hjb(args) -> int:
    try:
        with open(args.problem, encoding="utf-8") as fh:
            problem = hjb_mod.problem_from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load problem: {exc}")
    grid = hjb_mod.Grid(x_min=args.x_min, x_max=args.x_max, nx=args.nx, nt=args.nt)
    solution = hjb_mod.solve(problem, grid)
    if solution.cfl_adjusted:
        print(
            f"note: stability raised the time layers from {grid.nt} to {solution.cfl_nt}",
            file=sys.stderr,
        )
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            hjb_mod.solution_to_csv(solution, fh)
    else:
        hjb_mod.solution_to_csv(solution, sys.stdout)

    summary = {
        "nx": grid.nx,
        "time_layers": solution.cfl_nt,
        "value_at_x0": solution.value_at(0.0, args.x0),
    }
    if args.simulate:
        sim = hjb_mod.simulate_policy(
            problem, solution, args.x0, n_paths=args.simulate, seed=args.seed,
            sim_steps=args.sim_steps,
        )
        summary.update(
            {
                "mc_mean": sim.mean,
                "mc_std_error": sim.std_error,
                "mc_expectile_level": sim.expectile_level,
                "mc_expectile": sim.expectile,
                "mc_paths": sim.n_paths,
                "mc_clamped_moves": sim.n_clamped,
            }
        )
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="expectrisk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    seed_help = "random seed; subcommands without randomness accept and ignore it"

    p = sub.add_parser("expectile", help="static risk functionals of a CSV sample")
    p.add_argument("data", help="CSV file with a header row")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--value-column", default=None, help="defaults to 'value' or a single column")
    p.add_argument("--weight-column", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0, help=seed_help)
    p.set_defaults(func=_cmd_expectile)

    p = sub.add_parser("regress", help="kernel expectile regression")
    p.add_argument("data", help="CSV with feature columns and one target column")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
    p.add_argument("--target-column", default=None, help="defaults to the last column")
    p.add_argument("--kernel", choices=("gaussian", "laplace", "polynomial"), default="gaussian")
    p.add_argument("--bandwidth", type=float, default=None, help="gaussian bandwidth (default: median heuristic)")
    p.add_argument("--scale", type=float, default=None, help="laplace scale")
    p.add_argument("--degree", type=int, default=None, help="polynomial degree")
    p.add_argument("--offset", type=float, default=None, help="polynomial offset")
    p.add_argument("--support-file", default=None, help="CSV of expansion points")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--model-out", default="model.json")
    p.add_argument("--fitted-out", default="fitted.csv")
    p.add_argument("--seed", type=int, default=0, help=seed_help)
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("nested", help="nested expectile of a lattice or random walk")
    p.add_argument("--lattice", default=None, help="lattice JSON document")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--quad-nodes", type=int, default=None)
    p.add_argument("--spacing", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.0, help="rate constant / slope")
    p.add_argument("--beta-family", choices=("constant", "linear-time"), default="constant")
    p.add_argument("--convergence", action="store_true", help="emit a drift-convergence table")
    p.add_argument("--step-counts", default="8,32,128,512")
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0, help=seed_help)
    p.set_defaults(func=_cmd_nested)

    p = sub.add_parser("hjb", help="risk-averse finite-difference control solve")
    p.add_argument("problem", help="problem JSON document")
    p.add_argument("--x-min", type=float, required=True)
    p.add_argument("--x-max", type=float, required=True)
    p.add_argument("--nx", type=int, default=101)
    p.add_argument("--nt", type=int, default=1, help="lower bound; raised to satisfy stability")
    p.add_argument("--output", default=None, help="solution CSV (default stdout)")
    p.add_argument("--simulate", type=int, default=0, metavar="N", help="Monte Carlo paths")
    p.add_argument("--sim-steps", type=int, default=2000)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_hjb)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
