"""Backward adjoint sweep: the exact discrete transpose of the tangent.

Slot convention: the sweep returns fields indexed 0..n_steps.  Slot
n_steps carries the terminal data pi(T) = beta2(phi(T) - phi_T) +
beta3/2, rho(T) = 0 exactly.  Slot n < n_steps is the multiplier of the
step from t_n to t_{n+1}; it pairs with the step-n forcing in the duality
identity and with the step-n control slice in the cost gradient.

The terminal backward step applies no drift before the first solve; that
is what exact transposition of the discrete tangent demands (the terminal
data reaches the interior only through the phase solve).
"""

from dataclasses import dataclass

import numpy as np

from . import potential
from .errors import StepMismatch
from .forward import Stepper, Trajectory
from .functionals import CostSpec, trapezoid_weights
from .grid import ScalarField
from .sensitivity import require_tangent_ready, solve_tangent, \
    step_linearization


@dataclass(frozen=True)
class AdjointState:
    pi: ScalarField
    pi_tilde: ScalarField
    rho: ScalarField
    t: float


@dataclass
class AdjointResult:
    """Backward fields, slot-indexed 0..n_steps (see module docstring)."""

    pi: np.ndarray
    rho: np.ndarray

    def state(self, traj: Trajectory, n) -> AdjointState:
        g = traj.grid
        return AdjointState(
            pi=ScalarField(g, self.pi[n]),
            pi_tilde=ScalarField(g, -g.lap(self.pi[n])),
            rho=ScalarField(g, self.rho[n]),
            t=float(traj.times[n]))


def terminal_condition(traj: Trajectory, spec: CostSpec):
    grid = traj.grid
    phiT = traj.phi[traj.n_steps]
    return (spec.beta2 * (phiT - spec.terminal_target(grid))
            + 0.5 * spec.beta3)


def running_cost_source(traj: Trajectory, spec: CostSpec, n, weights):
    """beta1 * c_n * dt * (phi_n - phi_Q_n), the per-snapshot cost source."""
    if spec.beta1 == 0:
        return np.zeros(traj.grid.shape)
    target = spec.tracking_target(traj.grid, n, traj.n_steps)
    return spec.beta1 * weights[n] * traj.config.dt * (traj.phi[n] - target)


def adjoint_step_backward(stepper: Stepper, traj: Trajectory,
                          spec: CostSpec, weights, n, pi_next, rho_next):
    """Slot n from slot n+1; transposed phase solve first, then nutrient."""
    p, g = traj.params, traj.grid
    dt = traj.config.dt
    acc = pi_next + running_cost_source(traj, spec, n + 1, weights)
    if n + 1 < traj.n_steps:
        lin = step_linearization(traj, stepper, n + 1)
        acc = acc + dt * (p.B * lin.curvature * g.lap(pi_next)
                          - stepper.S * g.lap(pi_next)
                          + lin.reaction * pi_next
                          - p.c * lin.cross * rho_next)
    pi_n = stepper.solve_phase(acc)
    h_star = potential.h(traj.phi_star[n])
    rho_n = stepper.solve_nutrient(
        h_star, rho_next + dt * p.P * h_star * pi_n)
    return pi_n, rho_n


def solve_adjoint(traj: Trajectory, spec: CostSpec) -> AdjointResult:
    """Full backward sweep from the terminal condition."""
    require_tangent_ready(traj, who="adjoint sweep")
    grid, n_steps = traj.grid, traj.n_steps
    stepper = Stepper(grid, traj.params, traj.config, None)
    weights = trapezoid_weights(n_steps)
    pi = np.zeros((n_steps + 1,) + grid.shape)
    rho = np.zeros_like(pi)
    pi[n_steps] = terminal_condition(traj, spec)
    for n in range(n_steps - 1, -1, -1):
        pi[n], rho[n] = adjoint_step_backward(
            stepper, traj, spec, weights, n, pi[n + 1], rho[n + 1])
    return AdjointResult(pi=pi, rho=rho)


def cost_tangent_pairing(traj: Trajectory, spec: CostSpec, x):
    """Derivative of the state-dependent cost terms along a tangent x."""
    grid, n_steps = traj.grid, traj.n_steps
    weights = trapezoid_weights(n_steps)
    total = 0.0
    if spec.beta1 > 0:
        for n in range(n_steps + 1):
            total += grid.inner(
                running_cost_source(traj, spec, n, weights), x[n])
    total += grid.inner(terminal_condition(traj, spec), x[n_steps])
    return total


def duality_check(traj: Trajectory, spec: CostSpec, gamma1, gamma2):
    """Pathwise duality gap for forcing fields (gamma1, gamma2).

    lhs pairs the adjoint with the forcings, rhs pairs the cost sources
    with the tangent driven by the same forcings; for the exact discrete
    transpose the two agree to rounding.
    """
    grid, n_steps = traj.grid, traj.n_steps
    gamma1 = np.broadcast_to(np.asarray(gamma1, dtype=float),
                             (n_steps,) + grid.shape)
    gamma2 = np.broadcast_to(np.asarray(gamma2, dtype=float),
                             (n_steps,) + grid.shape)
    adj = solve_adjoint(traj, spec)
    dt = traj.config.dt
    lhs = sum(dt * (grid.inner(adj.pi[n], gamma1[n])
                    + grid.inner(adj.rho[n], gamma2[n]))
              for n in range(n_steps))
    tan = solve_tangent(traj, 0.0, 0.0, gamma1=gamma1, gamma2=gamma2)
    rhs = cost_tangent_pairing(traj, spec, tan.x)
    gap = abs(lhs - rhs) / (1.0 + abs(lhs))
    return lhs, rhs, gap
