import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from coefficients import as_field, sample_times
from export import (
    emit_plot_data,
    jsonable,
    read_report,
    read_sampled_function,
    read_trajectory,
    trajectory_path,
    write_json,
    write_report,
    write_trajectory,
)
from harness import (
    ConfigError,
    ExperimentConfig,
    analyze_saved,
    build_config,
    build_problem,
    load_config,
    run_ensemble,
    simulate_ensemble,
)
from sobolev import (
    SpaceSpec,
    bessel_negative_norm,
    dyadic_norm,
    dyadic_weight,
    make_kernel_table,
    weighted_integer_norm,
    weighted_sup,
)
from weight import check_generator_condition, comparability_constants, make_psi, make_zeta

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ENSEMBLE = 3


def _banner(title: str) -> None:
    print(f"\n{'='*70}")
    print(title)
    print(f"{'='*70}")


def _load(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = build_config({"preset": args.preset} if args.preset else {})
    return config.with_overrides(seed=args.seed, paths=args.paths, out=args.out)


def _estimate_line(label: str, est) -> str:
    if not est or est.get("median") is None:
        return f"  {label:<22} undefined"
    lo, hi = est["iqr"]
    return f"  {label:<22} {est['median']:.3f}  (IQR {lo:.3f} .. {hi:.3f}, n={est['count']})"


def _print_aggregate(report) -> None:
    agg = report.aggregate
    _banner("Ensemble summary")
    print(f"  Paths:                 {agg['paths']} ({agg['included']} included, {agg['excluded']} excluded)")
    print(f"  Diverged fraction:     {agg['diverged_fraction']:.3f}")
    print(_estimate_line("Interior space:", agg["interior_space"]))
    print(_estimate_line("Interior time:", agg["interior_time"]))
    print(_estimate_line("Weighted space:", agg["weighted_space"]))
    print(_estimate_line("Weighted time:", agg["weighted_time"]))
    print(_estimate_line("Boundary slope:", agg["boundary_slope"]))
    print(f"  Finite weighted sup:   {agg['weighted_sup_finite_fraction']:.3f}")
    print(f"  Below cutoff:          {agg['weighted_sup_bounded_fraction']:.3f}")
    print(f"  Cutoff active:         {agg['cutoff_active_fraction']:.3f}")
    neg = agg["negativity"]
    print(f"  Worst undershoot:      {neg['worst']:.3e} (tol {neg['tolerance']:.3e}, passed {neg['passed_fraction']:.3f})")
    print(f"\n  Targets: space {report.targets['space']:.3f}  time {report.targets['time']:.3f}  "
          f"weight {report.targets['weight']:.3f}")
    print(f"  Limits:  space {report.targets['limit_space']:.3f}  time {report.targets['limit_time']:.3f}")
    wall = report.metadata.get("wall_clock_s")
    if wall is not None:
        print(f"  Wall clock:            {wall:.1f} s on {report.metadata.get('workers')} workers")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    directory = os.path.join(config.out, "paths")
    os.makedirs(directory, exist_ok=True)
    print(f"Simulating {config.paths} paths (N={config.N}, lambda={config.lam}, seed={config.seed})...")
    trajectories = simulate_ensemble(config, args.workers)
    for traj in trajectories:
        filepath = trajectory_path(directory, traj.path_index)
        write_trajectory(traj, filepath)
        status = "diverged" if traj.diverged else "ok"
        print(
            f"Path {traj.path_index}: {status} | min={traj.running_min:.3e} | "
            f"cutoff={'on' if traj.cutoff_active else 'off'} | sup psi^-nu|u|={traj.max_weighted_sup:.3e}"
        )
        print(f"  → CSV: {filepath}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    report_file = None
    if args.out and args.out.endswith(".json"):
        report_file, args.out = args.out, os.path.dirname(args.out) or "."
    config = _load(args).with_overrides(kappa=args.kappa, lam=args.lam, p=args.p, theta=args.theta)
    directory = args.traj_dir or os.path.join(config.out, "paths")
    report = analyze_saved(config, directory, args.workers)
    report_file = report_file or os.path.join(config.out, "report.json")
    os.makedirs(os.path.dirname(report_file) or ".", exist_ok=True)
    write_report(report, report_file)
    _print_aggregate(report)
    print(f"\n→ Report: {report_file}")
    return EXIT_ENSEMBLE if report.invalid else EXIT_OK


def _norm_of_order(u: np.ndarray, order: float, p: float, theta: float, kappa: Optional[float], psi, zeta) -> float:
    if order in (0.0, 1.0, 2.0):
        return weighted_integer_norm(u, int(order), SpaceSpec(p=p, theta=theta, gamma=order))
    kappa = -order - 0.5 if kappa is None else kappa
    spec = SpaceSpec(p=p, theta=theta, gamma=order, kappa=kappa)
    return bessel_negative_norm(u, spec, zeta, psi, make_kernel_table(kappa))


def cmd_norm(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.input:
        u = read_sampled_function(args.input)
        result = {"input": args.input}
    else:
        filepath = args.trajectory or trajectory_path(os.path.join(config.out, "paths"), 0)
        traj = read_trajectory(filepath)
        u = traj.values[args.snapshot]
        result = {"trajectory": filepath, "snapshot_time": float(traj.times[args.snapshot])}
    p = config.p if args.p is None else args.p
    theta = config.theta if args.theta is None else args.theta
    psi = make_psi(config.K, config.delta0)
    zeta = make_zeta(p)
    result.update(p=p, theta=theta)
    if args.order is not None:
        result["order"] = args.order
        result["norm"] = _norm_of_order(u, args.order, p, theta, args.kappa, psi, zeta)
        print(json.dumps(jsonable(result), indent=2, sort_keys=True))
        return EXIT_OK

    kappa = config.kappa if args.kappa is None else args.kappa
    spec = SpaceSpec(p=p, theta=theta)
    x = np.linspace(0.0, 1.0, len(u))[1:-1]
    weights = dyadic_weight(x, spec, zeta, psi)
    result.update(
        kappa=kappa,
        integer_rho={str(g): weighted_integer_norm(u, g, spec, "rho") for g in (0, 1, 2)},
        integer_psi={str(g): weighted_integer_norm(u, g, spec, "psi", psi) for g in (0, 1, 2)},
        dyadic=dyadic_norm(u, spec, zeta, psi),
        dyadic_weight_range=[float(np.min(weights)), float(np.max(weights))],
        weighted_sup=weighted_sup(u, config.targets().cutoff_exponent, psi),
    )
    if not args.skip_negative:
        negative = SpaceSpec.negative(p, theta, kappa)
        result["bessel_negative"] = bessel_negative_norm(u, negative, zeta, psi, make_kernel_table(kappa))
    print(json.dumps(jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check_weight(args: argparse.Namespace) -> int:
    config = _load(args)
    K = config.K if args.K is None else args.K
    delta0 = config.delta0 if args.delta0 is None else args.delta0
    grid = args.grid or max(config.N, 1024)
    psi = make_psi(K, delta0)
    a = as_field(config.a)
    b = as_field(config.b)
    a_x = a.derivative()
    generator = check_generator_condition(psi, a, a_x, b, grid, sample_times(config.T, 5))
    c_lo, c_hi = comparability_constants(psi, grid)
    zeta = make_zeta(config.p)
    rules = replace(build_problem(config), K=K, delta0=delta0).validate()
    result = {
        "K1": psi.K1,
        "c_lo": c_lo,
        "c_hi": c_hi,
        "worst": generator["worst"],
        "generator": generator,
        "comparability": [c_lo, c_hi],
        "zeta": {"c": zeta.c, "c_half": zeta.c_half},
        "coefficients": rules,
    }
    print(json.dumps(jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK if generator["passed"] and rules["all"] else EXIT_INVALID


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    os.makedirs(config.out, exist_ok=True)
    print(f"Running {config.paths} paths end to end (N={config.N}, lambda={config.lam}, seed={config.seed})...")
    report = run_ensemble(config, args.workers)
    report_file = os.path.join(config.out, "report.json")
    write_report(report, report_file)
    write_json(report.metadata, os.path.join(config.out, "run_meta.json"))
    files = emit_plot_data(report, os.path.join(config.out, "plots"))
    _print_aggregate(report)
    print(f"\n→ Report: {report_file}")
    print(f"→ Plot data: {os.path.dirname(files['boundary_decay'])}")
    if report.invalid:
        print("Ensemble flagged invalid (too many diverged or failed paths).")
        return EXIT_ENSEMBLE
    return EXIT_OK


def cmd_emit_plots(args: argparse.Namespace) -> int:
    out = args.out or "outputs"
    report = read_report(os.path.join(out, "report.json"))
    files = emit_plot_data(report, os.path.join(out, "plots"))
    for name, filepath in sorted(files.items()):
        print(f"  → {name}: {filepath}")
    if args.png:
        from viz import render_all

        for png in render_all(files, os.path.join(out, "plots")):
            print(f"  → PNG: {png}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Simulate the Dirichlet SPDE and estimate its regularity")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Flat YAML experiment file")
    common.add_argument("--preset", default=None, help="Named preset when no config file is given")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--paths", type=int, default=None, help="Number of paths")
    common.add_argument("--out", default=None, help="Output directory")
    common.add_argument("--workers", type=int, default=None, help="Worker processes (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="Simulate paths and write trajectory files").set_defaults(fn=cmd_simulate)
    estimate = sub.add_parser("estimate", parents=[common], help="Estimate exponents from saved trajectories")
    estimate.add_argument("--traj-dir", default=None, help="Directory of path_<i>.csv files (default: <out>/paths)")
    estimate.add_argument("--kappa", type=float, default=None)
    estimate.add_argument("--lambda", dest="lam", type=float, default=None)
    estimate.add_argument("--p", type=float, default=None)
    estimate.add_argument("--theta", type=float, default=None)
    estimate.set_defaults(fn=cmd_estimate)
    norm = sub.add_parser("norm", parents=[common], help="Weighted norms of one sampled function")
    norm.add_argument("--input", default=None, help="CSV with x,u columns on a uniform grid of [0, 1]")
    norm.add_argument("--trajectory", default=None, help="Trajectory CSV (default: path_0 in --out)")
    norm.add_argument("--snapshot", type=int, default=-1, help="Snapshot row")
    norm.add_argument("--order", type=float, default=None, help="0, 1, 2 or -(1/2+kappa); omit for every norm")
    norm.add_argument("--p", type=float, default=None)
    norm.add_argument("--theta", type=float, default=None)
    norm.add_argument("--kappa", type=float, default=None)
    norm.add_argument("--skip-negative", action="store_true", help="Skip the negative-order norm")
    norm.set_defaults(fn=cmd_norm)
    weight = sub.add_parser("check-weight", parents=[common], help="Check the weight and coefficient conditions")
    weight.add_argument("--K", type=float, default=None)
    weight.add_argument("--delta0", type=float, default=None)
    weight.add_argument("--grid", type=int, default=None, help="Sample grid (at least 1001)")
    weight.set_defaults(fn=cmd_check_weight)
    sub.add_parser("run", parents=[common], help="Simulate, estimate and emit plot data").set_defaults(fn=cmd_run)
    plots = sub.add_parser("emit-plots", parents=[common], help="Plot CSVs (and PNGs) from a report")
    plots.add_argument("--png", action="store_true", help="Also render PNG images")
    plots.set_defaults(fn=cmd_emit_plots)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print("Invalid configuration:", file=sys.stderr)
        if exc.line is not None:
            print(f"  line {exc.line}", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"Invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
