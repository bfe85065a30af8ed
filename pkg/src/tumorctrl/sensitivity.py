"""Tangent (linearized) sweep along a stored trajectory.

The tangent step is the exact derivative of the implemented forward step
map: same linear operators, same stabilization, the well curvature taken
at the step-start state and the proliferation slope at the frozen
evaluation points the accepted step actually used.  Because the adjoint
sweep is the exact transpose of this map, the discrete duality identity
holds to rounding, and for single-pass stepping the tangent is the exact
derivative of the discrete control-to-state map.

Only the additive-noise regime is supported: the multiplicative driver
must be off, which is also the regime in which the control theory is
formulated.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

import numpy.typing as npt

from . import potential
from .controls import ControlPair
from .errors import BaseTrajectoryMismatch, ConfigInvalid
from .forward import Stepper, Trajectory, simulate
from .functionals import trapezoid_weights


def require_tangent_ready(traj: Trajectory, who="tangent sweep"):
    traj.require_full(who)
    if traj.mult_spec is not None and traj.mult_spec.active:
        raise ConfigInvalid(
            "H0", f"{who} is defined in the H == 0 regime only")
    if np.any(traj.diagnostics.get("clamped_mass", np.zeros(1)) > 0):
        raise BaseTrajectoryMismatch(
            f"{who} cannot linearize through active nutrient clamping")


@dataclass
class StepLinearization:
    """Frozen multiplier fields of one forward step."""

    h_star: np.ndarray       # h at the phase evaluation point
    curvature: np.ndarray    # psi'' (possibly regularized) at phi_n
    reaction: np.ndarray     # (P sigma_{n+1} - a - alpha u_n) h'(phi_star)
    cross: np.ndarray        # h'(phi_star) sigma_{n+1}


def step_linearization(traj: Trajectory, stepper: Stepper,
                       n: int) -> StepLinearization:
    p = traj.params
    phi_star = traj.phi_star[n]
    sigma_next = traj.sigma[n + 1]
    hp = potential.h_prime(phi_star)
    return StepLinearization(
        h_star=potential.h(phi_star),
        curvature=stepper.psi_pp(traj.phi[n]),
        reaction=(p.P * sigma_next - p.a - p.alpha * traj.controls.u[n]) * hp,
        cross=hp * sigma_next)


@dataclass
class TangentResult:
    """Tangent fields along the base trajectory; x(0) = z(0) = 0."""

    x: np.ndarray             # (n_steps+1, *shape) tangent phase
    z: np.ndarray             # (n_steps+1, *shape) tangent nutrient
    source_mean: np.ndarray   # per-step mean of the differentiated source

    def y(self, traj: Trajectory, stepper: Stepper, n: int):
        """Tangent chemical potential at snapshot n."""
        g = traj.grid
        return (-traj.params.A * g.lap(self.x[n])
                + traj.params.B * stepper.psi_pp(traj.phi[n]) * self.x[n])


def tangent_step(stepper: Stepper, lin: StepLinearization, x_n, z_n,
                 k_u_n, k_w_n, gamma1_n=None, gamma2_n=None):
    """One step of the derivative of the forward map; z first, then x."""
    p, g = stepper.params, stepper.grid
    dt = stepper.config.dt
    rhs_z = z_n + dt * (p.b * k_w_n - p.c * lin.cross * x_n)
    if gamma2_n is not None:
        rhs_z = rhs_z + dt * gamma2_n
    z_next = stepper.solve_nutrient(lin.h_star, rhs_z)
    source = ((p.P * z_next - p.alpha * k_u_n) * lin.h_star
              + lin.reaction * x_n)
    rhs_x = (x_n + dt * g.lap(p.B * lin.curvature * x_n)
             - dt * stepper.S * g.lap(x_n) + dt * source)
    if gamma1_n is not None:
        rhs_x = rhs_x + dt * gamma1_n
        source = source + gamma1_n
    x_next = stepper.solve_phase(rhs_x)
    return x_next, z_next, g.mean(source)


def solve_tangent(traj: Trajectory, k_u, k_w,
                  gamma1: Optional[npt.NDArray] = None,
                  gamma2: Optional[npt.NDArray] = None) -> TangentResult:
    """Directional derivative of the state along (k_u, k_w).

    ``gamma1``/``gamma2`` add per-step forcing fields to the phase and
    nutrient equations (the generalized system the duality check drives).
    """
    require_tangent_ready(traj)
    grid, n_steps = traj.grid, traj.n_steps
    k_u = np.broadcast_to(np.asarray(k_u, dtype=float),
                          (n_steps,) + grid.shape)
    k_w = np.broadcast_to(np.asarray(k_w, dtype=float),
                          (n_steps,) + grid.shape)
    stepper = Stepper(grid, traj.params, traj.config, None)
    x = np.zeros((n_steps + 1,) + grid.shape)
    z = np.zeros_like(x)
    src_mean = np.zeros(n_steps)
    for n in range(n_steps):
        lin = step_linearization(traj, stepper, n)
        x[n + 1], z[n + 1], src_mean[n] = tangent_step(
            stepper, lin, x[n], z[n], k_u[n], k_w[n],
            None if gamma1 is None else gamma1[n],
            None if gamma2 is None else gamma2[n])
    return TangentResult(x=x, z=z, source_mean=src_mean)


def space_time_norm(grid, dt, fields):
    """Trapezoid-in-time L^2(0,T;H) norm of a snapshot-indexed array."""
    c = trapezoid_weights(fields.shape[0] - 1)
    total = sum(c[n] * dt * grid.inner(fields[n], fields[n])
                for n in range(fields.shape[0]))
    return float(np.sqrt(total))


def gateaux_check(phi0, sigma0, controls: ControlPair, direction: ControlPair,
                  epsilons, path, params, config, bypass=False):
    """Remainder table r(eps) = |(phi_eps - phi)/eps - x| in L^2(0,T;H).

    All forward solves share the same noise path, so the additive noise
    cancels in the divided difference.  The perturbed controls must stay
    admissible for every tested eps unless bypass is set.
    """
    base = simulate(phi0, sigma0, controls, path, params, config,
                    bypass=bypass)
    tan = solve_tangent(base, direction.u, direction.w)
    rows = []
    for eps in epsilons:
        shifted = ControlPair(controls.u + eps * direction.u,
                              controls.w + eps * direction.w)
        shifted.validate_box(bypass=bypass)
        pert = simulate(phi0, sigma0, shifted, path, params, config,
                        bypass=bypass)
        resid = (pert.phi - base.phi) / eps - tan.x
        rows.append((float(eps),
                     space_time_norm(base.grid, config.dt, resid)))
    return rows


def observed_orders(rows):
    """Successive convergence orders of a (parameter, error) table."""
    orders = []
    for (e1, r1), (e2, r2) in zip(rows, rows[1:]):
        if r1 == 0.0 or r2 == 0.0:
            orders.append(np.inf)
        else:
            orders.append(float(np.log(r1 / r2) / np.log(e1 / e2)))
    return orders
