"""Scalar observables: free energy and the treatment cost functional.

The cost uses trapezoid-in-time quadrature on the stored snapshots for
the tracking term and exact integration of the piecewise-constant-in-time
controls.  These are precisely the weights the optimizer's inner products
use, so the adjoint gradient of the discrete cost is exact.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import potential
from .controls import ControlPair
from .errors import EmptyEnsemble, GridMismatch, StepMismatch
from .grid import Grid, ScalarField


def free_energy_values(grid: Grid, values, A, B):
    """(A/2) \\int |grad phi|^2 + B \\int psi(phi) on raw values."""
    return (0.5 * A * grid.grad_norm_sq(values)
            + B * grid.integral(potential.psi(values)))


def free_energy(phi: ScalarField, params) -> float:
    return free_energy_values(phi.grid, phi.values, params.A, params.B)


def trapezoid_weights(n_steps):
    """Snapshot weights c_n of the composite trapezoid rule on 0..n_steps."""
    c = np.ones(n_steps + 1)
    c[0] = c[-1] = 0.5
    return c


@dataclass(frozen=True)
class CostSpec:
    """Weights and targets of the treatment cost functional.

    ``phi_Q`` is either one field (constant in time) or one field per
    stored snapshot; ``phi_T`` is a single terminal target.
    """

    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    beta4: float = 0.0
    beta5: float = 0.0
    phi_Q: Optional[np.ndarray] = field(default=None, repr=False)
    phi_T: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "beta4", "beta5"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("phi_Q", "phi_T"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if not np.isfinite(v).all():
                    raise ValueError(f"{name} must be finite")
                object.__setattr__(self, name, v)

    def tracking_target(self, grid: Grid, n, n_steps):
        """phi_Q at snapshot n (zeros when beta1 = 0 and no target set)."""
        if self.phi_Q is None:
            return np.zeros(grid.shape)
        if self.phi_Q.shape == grid.shape:
            return self.phi_Q
        if self.phi_Q.shape == (n_steps + 1,) + grid.shape:
            return self.phi_Q[n]
        raise GridMismatch(
            f"phi_Q shaped {self.phi_Q.shape} matches neither {grid.shape} "
            f"nor {(n_steps + 1,) + grid.shape}")

    def terminal_target(self, grid: Grid):
        if self.phi_T is None:
            return np.zeros(grid.shape)
        if self.phi_T.shape != grid.shape:
            raise GridMismatch(
                f"phi_T shaped {self.phi_T.shape}, expected {grid.shape}")
        return self.phi_T


def cost_path(traj, controls: ControlPair, spec: CostSpec) -> float:
    """Single-path value of the bracketed quantity inside the expectation."""
    grid = traj.grid
    n_steps = traj.n_steps
    if not traj.is_full:
        raise StepMismatch("cost_path needs a stride-1 trajectory")
    controls.check_grid(grid, n_steps)
    dt = traj.config.dt
    c = trapezoid_weights(n_steps)
    total = 0.0
    if spec.beta1 > 0:
        track = 0.0
        for n in range(n_steps + 1):
            d = traj.phi[n] - spec.tracking_target(grid, n, n_steps)
            track += c[n] * dt * grid.inner(d, d)
        total += 0.5 * spec.beta1 * track
    phiT = traj.phi[n_steps]
    if spec.beta2 > 0:
        d = phiT - spec.terminal_target(grid)
        total += 0.5 * spec.beta2 * grid.inner(d, d)
    if spec.beta3 > 0:
        total += 0.5 * spec.beta3 * grid.integral(phiT + 1.0)
    if spec.beta4 > 0:
        total += 0.5 * spec.beta4 * dt * float(
            np.vdot(controls.u, controls.u)) * grid.cell_volume
    if spec.beta5 > 0:
        total += 0.5 * spec.beta5 * dt * float(
            np.vdot(controls.w, controls.w)) * grid.cell_volume
    return total


def cost_ensemble(trajectories, controls: ControlPair, spec: CostSpec):
    """Sample mean and standard error of cost_path over an ensemble."""
    if len(trajectories) == 0:
        raise EmptyEnsemble("cost_ensemble needs at least one path")
    costs = np.array([cost_path(t, controls, spec) for t in trajectories])
    if costs.size == 1 or np.all(costs == costs[0]):
        return float(costs[0]), 0.0
    m = float(costs.mean())
    se = float(costs.std(ddof=1) / np.sqrt(costs.size))
    return m, se
