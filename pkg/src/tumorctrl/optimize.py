"""Projected gradient descent over the box-constrained admissible set.

The expectation in the cost is replaced by a sample average over a fixed
ensemble of noise paths (common random numbers), which makes the sampled
cost a deterministic function of the controls and the line search
well-posed.  The gradient slices are

    g_u[n] = beta4*u[n] - alpha * mean_paths( h(phi*) pi )[n]
    g_w[n] = beta5*w[n] + b     * mean_paths( rho )[n]

with the adjoint slot pairing of the duality identity, so the gradient
of the sampled discrete cost is exact.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import potential
from .adjoint import solve_adjoint
from .controls import ControlPair
from .errors import EmptyEnsemble, LineSearchFailure
from .forward import ModelParams, SolverConfig, simulate
from .functionals import CostSpec, cost_path
from .grid import Grid, ScalarField


def project_box(x):
    """Pointwise clamp to [0,1]: the L^2 projection onto the box."""
    if isinstance(x, ControlPair):
        return ControlPair(np.clip(x.u, 0.0, 1.0), np.clip(x.w, 0.0, 1.0))
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def control_inner(grid: Grid, dt, a: ControlPair, b: ControlPair):
    """Space-time L^2 inner product over both control components."""
    return dt * grid.cell_volume * (float(np.vdot(a.u, b.u))
                                    + float(np.vdot(a.w, b.w)))


def control_norm(grid: Grid, dt, a: ControlPair):
    return float(np.sqrt(control_inner(grid, dt, a, a)))


def kkt_residual(grid: Grid, dt, controls: ControlPair,
                 grad: ControlPair) -> float:
    """Space-time norm of c - proj(c - g); zero exactly at VI points."""
    moved = project_box(ControlPair(controls.u - grad.u,
                                    controls.w - grad.w))
    return control_norm(grid, dt, ControlPair(controls.u - moved.u,
                                              controls.w - moved.w))


@dataclass
class GradientResult:
    grad: ControlPair
    cost: float            # ensemble-mean sampled cost at the controls
    mean_h_pi: np.ndarray  # ensemble mean of h(phi*) pi, per step
    mean_rho: np.ndarray   # ensemble mean of rho, per step


@dataclass
class ControlProblem:
    """Sample-average optimal control problem on a fixed path ensemble."""

    grid: Grid
    phi0: ScalarField
    sigma0: ScalarField
    params: ModelParams
    config: SolverConfig
    cost_spec: CostSpec
    paths: list
    threads: int = 1
    bypass: bool = False

    def __post_init__(self):
        if len(self.paths) == 0:
            raise EmptyEnsemble("the ensemble needs at least one path")

    def _map(self, fn):
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(fn, range(len(self.paths))))
        return [fn(i) for i in range(len(self.paths))]

    def simulate_path(self, controls: ControlPair, i: int):
        return simulate(self.phi0, self.sigma0, controls, self.paths[i],
                        self.params, self.config, mult_spec=None,
                        bypass=self.bypass)

    def cost(self, controls: ControlPair) -> float:
        vals = self._map(
            lambda i: cost_path(self.simulate_path(controls, i),
                                controls, self.cost_spec))
        return float(np.mean(np.array(vals)))

    def gradient(self, controls: ControlPair) -> GradientResult:
        def one(i):
            traj = self.simulate_path(controls, i)
            adj = solve_adjoint(traj, self.cost_spec)
            n = self.config.n_steps
            h_pi = potential.h(traj.phi_star) * adj.pi[:n]
            return (cost_path(traj, controls, self.cost_spec),
                    h_pi, adj.rho[:n])

        results = self._map(one)
        m = float(len(results))
        cost = float(np.mean(np.array([r[0] for r in results])))
        mean_h_pi = sum(r[1] for r in results) / m
        mean_rho = sum(r[2] for r in results) / m
        p, s = self.params, self.cost_spec
        grad = ControlPair(s.beta4 * controls.u - p.alpha * mean_h_pi,
                           s.beta5 * controls.w + p.b * mean_rho)
        return GradientResult(grad=grad, cost=cost,
                              mean_h_pi=mean_h_pi, mean_rho=mean_rho)

    def kkt(self, controls: ControlPair, grad: ControlPair) -> float:
        return kkt_residual(self.grid, self.config.dt, controls, grad)

    def projection_residuals(self, controls: ControlPair,
                             g: GradientResult):
        """Distance of the controls to the projection-formula fixed point."""
        p, s = self.params, self.cost_spec
        dt, grid = self.config.dt, self.grid
        out = {}
        if s.beta4 > 0:
            target = project_box((p.alpha / s.beta4) * g.mean_h_pi)
            zero_w = np.zeros_like(controls.w)
            out["u"] = control_norm(grid, dt, ControlPair(
                controls.u - target, zero_w))
        if s.beta5 > 0:
            target = project_box(-(p.b / s.beta5) * g.mean_rho)
            zero_u = np.zeros_like(controls.u)
            out["w"] = control_norm(grid, dt, ControlPair(
                zero_u, controls.w - target))
        return out


@dataclass
class ArmijoOptions:
    tau0: float = 1.0
    shrink: float = 0.5
    c1: float = 1e-4
    max_backtracks: int = 60
    tau_floor: float = 1e-12


@dataclass
class OptimOptions:
    max_iters: int = 100
    tol_kkt: float = 1e-6
    armijo: ArmijoOptions = dc_field(default_factory=ArmijoOptions)


@dataclass
class OptimReport:
    """Per-iterate record of the descent; wall time stays out of the
    reproducible artifacts and is reported via run metadata only."""

    iterations: list
    ensemble: int
    converged: bool
    kkt_final: float
    cost_final: float
    projection_residuals: dict
    wall_time: float


def projected_gradient_descent(problem: ControlProblem,
                               initial: ControlPair,
                               options: Optional[OptimOptions] = None):
    """Armijo-backtracked projected gradient descent on the sampled cost."""
    opts = options or OptimOptions()
    arm = opts.armijo
    grid, dt = problem.grid, problem.config.dt
    t0 = time.perf_counter()

    controls = project_box(initial)
    rows = []
    g = problem.gradient(controls)
    cost = g.cost
    converged = False
    kkt = np.inf
    for it in range(opts.max_iters):
        kkt = problem.kkt(controls, g.grad)
        gnorm = control_norm(grid, dt, g.grad)
        if kkt <= opts.tol_kkt:
            rows.append({"iter": it, "cost": cost, "grad_norm": gnorm,
                         "kkt": kkt, "tau": 0.0, "backtracks": 0})
            converged = True
            break
        tau = arm.tau0
        accepted = None
        for bt in range(arm.max_backtracks):
            trial = project_box(ControlPair(controls.u - tau * g.grad.u,
                                            controls.w - tau * g.grad.w))
            step = ControlPair(trial.u - controls.u, trial.w - controls.w)
            decrease = control_inner(grid, dt, g.grad, step)
            trial_cost = problem.cost(trial)
            if trial_cost <= cost + arm.c1 * decrease:
                accepted = (trial, trial_cost, tau, bt)
                break
            tau *= arm.shrink
            if tau < arm.tau_floor:
                break
        if accepted is None:
            raise LineSearchFailure(
                f"Armijo step underflow at iterate {it} (kkt {kkt:.3e})")
        rows.append({"iter": it, "cost": cost, "grad_norm": gnorm,
                     "kkt": kkt, "tau": accepted[2],
                     "backtracks": accepted[3]})
        controls, cost = accepted[0], accepted[1]
        g = problem.gradient(controls)

    if not converged:
        kkt = problem.kkt(controls, g.grad)
        rows.append({"iter": opts.max_iters, "cost": cost,
                     "grad_norm": control_norm(grid, dt, g.grad),
                     "kkt": kkt, "tau": 0.0, "backtracks": 0})
    report = OptimReport(
        iterations=rows, ensemble=len(problem.paths),
        converged=converged or kkt <= opts.tol_kkt, kkt_final=float(kkt),
        cost_final=float(cost),
        projection_residuals=problem.projection_residuals(controls, g),
        wall_time=time.perf_counter() - t0)
    return controls, report
