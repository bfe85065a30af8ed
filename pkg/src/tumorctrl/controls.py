"""Space-time control pair constrained to the unit box."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, GridMismatch, StepMismatch
from .grid import Grid


@dataclass(frozen=True)
class ControlPair:
    """Controls (u, w) on the solver's step grid: one slice per step.

    Both arrays have shape (n_steps, *grid.shape); slice n acts on the
    step from t_n to t_{n+1} (controls are piecewise constant in time).
    """

    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if u.shape != w.shape:
            raise StepMismatch(f"u shape {u.shape} != w shape {w.shape}")
        if not (np.isfinite(u).all() and np.isfinite(w).all()):
            raise ValueError("controls must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)

    @property
    def n_steps(self):
        return self.u.shape[0]

    def check_grid(self, grid: Grid, n_steps: int):
        if self.u.shape != (n_steps,) + grid.shape:
            raise GridMismatch(
                f"controls shaped {self.u.shape}, expected "
                f"{(n_steps,) + grid.shape}")

    def validate_box(self, bypass=False):
        lo = min(self.u.min(), self.w.min()) if self.u.size else 0.0
        hi = max(self.u.max(), self.w.max()) if self.u.size else 0.0
        if not bypass and (lo < 0.0 or hi > 1.0):
            raise ConfigInvalid(
                "A5", f"controls must lie in [0,1], found range "
                f"[{lo:.3g}, {hi:.3g}]")

    def copy(self):
        return ControlPair(self.u.copy(), self.w.copy())


def constant_controls(grid: Grid, n_steps: int, u_value, w_value):
    shape = (n_steps,) + grid.shape
    return ControlPair(np.full(shape, float(u_value)),
                       np.full(shape, float(w_value)))
