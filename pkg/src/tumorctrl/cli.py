"""Command-line front end.

Subcommands: simulate, ensemble, gradcheck, duality, yosida, optimize,
print-config.  Every subcommand is a pure function of (config, seed) up
to timestamps, which are confined to meta.json.

Exit codes: 0 ok, 2 invalid configuration, 3 solver failure, 4 I/O.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import artifacts
from .adjoint import duality_check
from .config import default_config_dict, load_config
from .controls import ControlPair
from .errors import ArtifactIOError, ConfigInvalid, SolverError, \
    TumorCtrlError
from .forward import simulate, yosida_convergence_study
from .functionals import cost_path
from .noise import generate_path, path_rng
from .optimize import ControlProblem, control_inner, \
    projected_gradient_descent
from .sensitivity import gateaux_check, observed_orders


def _paths_for(rc, n_paths):
    return [generate_path(rc.grid, rc.add_spec, rc.mult_spec, rc.solver.dt,
                          rc.solver.n_steps, rc.seed, i)
            for i in range(n_paths)]


def _run_paths(rc, n_paths, threads, fn):
    """Evaluate fn(path_index) for each path, reduced in index order."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_paths)))
    return [fn(i) for i in range(n_paths)]


def cmd_simulate(rc, out_dir, args):
    path = _paths_for(rc, 1)[0]
    traj = simulate(rc.phi0, rc.sigma0, rc.controls, path, rc.params,
                    rc.solver, mult_spec=rc.mult_spec, stride=rc.stride,
                    bypass=rc.bypass)
    artifacts.write_diagnostics(out_dir, traj)
    artifacts.write_snapshots(out_dir, traj)
    d = traj.diagnostics
    report = [
        f"config_hash: {rc.config_hash()}",
        f"n_steps: {rc.solver.n_steps}",
        f"final_mass: {artifacts.fmt(float(d['mass'][-1]))}",
        f"final_energy: {artifacts.fmt(float(d['energy'][-1]))}",
        f"sigma_range: [{artifacts.fmt(float(d['sigma_min'].min()))}, "
        f"{artifacts.fmt(float(d['sigma_max'].max()))}]",
        f"max_mass_residual: "
        f"{artifacts.fmt(float(d['mass_residual'].max()))}",
        f"total_clamped_mass: "
        f"{artifacts.fmt(float(d['clamped_mass'].sum()))}",
    ]
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(report) + "\n")
    return 0


def cmd_ensemble(rc, out_dir, args):
    n_paths = args.paths or rc.ensemble
    paths = _paths_for(rc, n_paths)

    def one(i):
        traj = simulate(rc.phi0, rc.sigma0, rc.controls, paths[i], rc.params,
                        rc.solver, mult_spec=rc.mult_spec, bypass=rc.bypass)
        d = traj.diagnostics
        return (cost_path(traj, rc.controls, rc.cost),
                float(d["mass"][-1]), float(d["sigma_min"].min()),
                float(d["sigma_max"].max()), float(d["clamped_mass"].sum()),
                float(d["mass_residual"].max()))

    rows = _run_paths(rc, n_paths, args.threads, one)
    costs = np.array([r[0] for r in rows])
    mean = float(costs.mean())
    se = (float(costs.std(ddof=1) / np.sqrt(n_paths))
          if n_paths > 1 else 0.0)
    artifacts.write_csv(
        os.path.join(out_dir, "costs.csv"),
        ["path", "cost", "final_mass", "sigma_min", "sigma_max",
         "total_clamped_mass", "max_mass_residual"],
        [[i] + list(r) for i, r in enumerate(rows)])
    report = [
        f"config_hash: {rc.config_hash()}",
        f"paths: {n_paths}",
        f"cost_mean: {artifacts.fmt(mean)}",
        f"cost_std_error: {artifacts.fmt(se)}",
    ]
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(report) + "\n")
    return 0


def _gradcheck_direction(rc, rng):
    shape = (rc.solver.n_steps,) + rc.grid.shape
    return ControlPair(rng.uniform(-1.0, 1.0, shape),
                       rng.uniform(-1.0, 1.0, shape))


def cmd_gradcheck(rc, out_dir, args):
    epsilons = [float(x) for x in args.epsilons.split(",")]
    rng = path_rng(rc.seed, 2 ** 32)  # off-path stream for directions
    direction = _gradcheck_direction(rc, rng)
    scale = 1.0 / max(np.abs(direction.u).max(),
                      np.abs(direction.w).max(), 1.0)
    direction = ControlPair(scale * direction.u, scale * direction.w)
    path = _paths_for(rc, 1)[0]
    rows = gateaux_check(rc.phi0, rc.sigma0, rc.controls, direction,
                         epsilons, path, rc.params, rc.solver,
                         bypass=rc.bypass)
    orders = observed_orders(rows)
    artifacts.write_csv(
        os.path.join(out_dir, "gateaux.csv"),
        ["epsilon", "remainder", "order"],
        [[e, r, orders[i - 1] if i else float("nan")]
         for i, (e, r) in enumerate(rows)])

    paths = _paths_for(rc, rc.ensemble)
    problem = ControlProblem(grid=rc.grid, phi0=rc.phi0, sigma0=rc.sigma0,
                             params=rc.params, config=rc.solver,
                             cost_spec=rc.cost, paths=paths,
                             threads=args.threads, bypass=rc.bypass)
    g = problem.gradient(rc.controls)
    eps = args.fd_epsilon
    fd_rows = []
    for k in range(args.directions):
        d = _gradcheck_direction(rc, rng)
        adjoint_dd = control_inner(rc.grid, rc.solver.dt, g.grad, d)
        plus = ControlPair(rc.controls.u + eps * d.u,
                           rc.controls.w + eps * d.w)
        minus = ControlPair(rc.controls.u - eps * d.u,
                            rc.controls.w - eps * d.w)
        fd_dd = (problem.cost(plus) - problem.cost(minus)) / (2 * eps)
        rel = abs(adjoint_dd - fd_dd) / max(abs(fd_dd), 1e-300)
        fd_rows.append([k, adjoint_dd, fd_dd, rel])
    artifacts.write_csv(os.path.join(out_dir, "gradfd.csv"),
                        ["direction", "adjoint", "finite_difference",
                         "rel_error"], fd_rows)
    report = [
        f"config_hash: {rc.config_hash()}",
        f"gateaux_orders: {[artifacts.fmt(o) for o in orders]}",
        f"max_fd_rel_error: "
        f"{artifacts.fmt(max(r[3] for r in fd_rows))}",
    ]
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(report) + "\n")
    return 0


def cmd_duality(rc, out_dir, args):
    path = _paths_for(rc, 1)[0]
    traj = simulate(rc.phi0, rc.sigma0, rc.controls, path, rc.params,
                    rc.solver, mult_spec=None, bypass=rc.bypass)
    rng = path_rng(rc.seed, 2 ** 32 + 1)
    rows = []
    shape = (rc.solver.n_steps,) + rc.grid.shape
    for trial in range(args.trials):
        g1 = rng.uniform(-1.0, 1.0, shape)
        g2 = rng.uniform(-1.0, 1.0, shape)
        lhs, rhs, gap = duality_check(traj, rc.cost, g1, g2)
        rows.append([trial, lhs, rhs, gap])
    artifacts.write_csv(os.path.join(out_dir, "duality.csv"),
                        ["trial", "lhs", "rhs", "gap"], rows)
    report = [
        f"config_hash: {rc.config_hash()}",
        f"trials: {args.trials}",
        f"max_gap: {artifacts.fmt(max(r[3] for r in rows))}",
    ]
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(report) + "\n")
    return 0


def cmd_yosida(rc, out_dir, args):
    lambdas = [float(x) for x in args.lambdas.split(",")]
    path = _paths_for(rc, 1)[0]
    rows = yosida_convergence_study(rc.phi0, rc.sigma0, rc.controls, path,
                                    rc.params, rc.solver, lambdas,
                                    mult_spec=rc.mult_spec, bypass=rc.bypass)
    artifacts.write_csv(os.path.join(out_dir, "yosida.csv"),
                        ["lambda", "gap"], [list(r) for r in rows])
    report = [
        f"config_hash: {rc.config_hash()}",
        f"gaps: {[artifacts.fmt(g) for _, g in rows]}",
    ]
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(report) + "\n")
    return 0


def cmd_optimize(rc, out_dir, args):
    n_paths = args.paths or rc.ensemble
    paths = _paths_for(rc, n_paths)
    problem = ControlProblem(grid=rc.grid, phi0=rc.phi0, sigma0=rc.sigma0,
                             params=rc.params, config=rc.solver,
                             cost_spec=rc.cost, paths=paths,
                             threads=args.threads, bypass=rc.bypass)
    controls, report = projected_gradient_descent(problem, rc.controls,
                                                  rc.optim)
    artifacts.write_csv(
        os.path.join(out_dir, "optim.csv"),
        ["iter", "cost", "grad_norm", "kkt", "tau", "backtracks"],
        [[r["iter"], r["cost"], r["grad_norm"], r["kkt"], r["tau"],
          r["backtracks"]] for r in report.iterations])
    artifacts.write_controls(out_dir, rc.grid, controls)
    proj = report.projection_residuals
    lines = [
        f"config_hash: {rc.config_hash()}",
        f"ensemble: {report.ensemble}",
        f"converged: {report.converged}",
        f"kkt_final: {artifacts.fmt(report.kkt_final)}",
        f"cost_final: {artifacts.fmt(report.cost_final)}",
    ]
    for key in sorted(proj):
        lines.append(f"projection_residual_{key}: "
                     f"{artifacts.fmt(proj[key])}")
    artifacts.write_text(os.path.join(out_dir, "report.txt"),
                         "\n".join(lines) + "\n")
    artifacts.write_meta(out_dir, "optimize",
                         {"wall_time_s": report.wall_time})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tumorctrl",
        description="Stochastic phase-field tumor growth: simulation, "
                    "verification checks, and treatment optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override config seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--stride", type=int, default=None,
                       help="override snapshot storage stride")
        p.add_argument("--paths", type=int, default=None,
                       help="override ensemble size")

    p = sub.add_parser("simulate", help="integrate one sample path")
    common(p)
    p = sub.add_parser("ensemble", help="run an ensemble and estimate cost")
    common(p)
    p = sub.add_parser("gradcheck",
                       help="tangent remainder and gradient-vs-FD tables")
    common(p)
    p.add_argument("--epsilons", default="1e-1,1e-2,1e-3")
    p.add_argument("--directions", type=int, default=3)
    p.add_argument("--fd-epsilon", type=float, default=1e-4)
    p = sub.add_parser("duality", help="pathwise duality gaps")
    common(p)
    p.add_argument("--trials", type=int, default=5)
    p = sub.add_parser("yosida", help="regularization convergence table")
    common(p)
    p.add_argument("--lambdas", default="1e-1,1e-2,1e-3")
    p = sub.add_parser("optimize", help="projected gradient descent")
    common(p)
    sub.add_parser("print-config", help="dump the default configuration")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "gradcheck": cmd_gradcheck,
    "duality": cmd_duality,
    "yosida": cmd_yosida,
    "optimize": cmd_optimize,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "print-config":
        print(yaml.safe_dump(default_config_dict(), sort_keys=True,
                             default_flow_style=False), end="")
        return 0
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.stride is not None:
        overrides["stride"] = args.stride
    try:
        rc = load_config(args.config, overrides)
        artifacts.prepare_out_dir(args.out, rc)
        code = COMMANDS[args.command](rc, args.out, args)
        if args.command != "optimize":
            artifacts.write_meta(args.out, args.command)
        return code
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except (ArtifactIOError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except TumorCtrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
