"""Semi-implicit Euler-Maruyama integration of the coupled state system.

Per step the nutrient is solved first (implicit drift, conjugate
gradient on an M-matrix), then the phase field (linearly-implicit convex
splitting with stabilization S, diagonalized in the cosine basis), with
the fresh nutrient entering the proliferation source.  Noise enters
explicitly.  An optional coupling iteration re-evaluates the frozen
h/H evaluation points, mirroring the contraction the well-posedness
argument is built on; the evaluation points actually used by the
accepted step are stored so the tangent and adjoint sweeps can reproduce
the exact linearization.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import potential
from .controls import ControlPair
from .errors import (BaseTrajectoryMismatch, ConfigInvalid,
                     LinearSolveFailure, NoConvergence, NonFiniteState,
                     PicardNoConvergence, StepMismatch)
from .functionals import free_energy_values
from .grid import Grid, ScalarField, cg_solve
from .noise import ModeBasis, MultiplicativeNoiseSpec, NoisePath, \
    multiplicative_field


@dataclass(frozen=True)
class ModelParams:
    """Positive model constants: proliferation P, apoptosis a, drug
    effectiveness alpha, nutrient supply b, consumption c, interface A, B."""

    P: float
    a: float
    alpha: float
    b: float
    c: float
    A: float
    B: float

    def validate(self, bypass=False):
        if self.A <= 0 or self.B <= 0:
            raise ConfigInvalid("A1", "interface constants A, B must be > 0")
        rates = {"P": self.P, "a": self.a, "alpha": self.alpha,
                 "b": self.b, "c": self.c}
        bad = [k for k, v in rates.items() if v < 0]
        if bad:
            raise ConfigInvalid("A1", f"constants must be >= 0: {bad}")
        if not bypass:
            zero = [k for k, v in rates.items() if v == 0]
            if zero:
                raise ConfigInvalid(
                    "A1", f"constants must be strictly positive: {zero} "
                    f"(set validation bypass for degenerate test cases)")


@dataclass(frozen=True)
class SolverConfig:
    """Time discretization and per-step solver knobs.

    ``stabilization`` defaults to 2B, the value for which the splitting
    is dissipative on the physical range of the quartic well.
    """

    dt: float
    n_steps: int
    stabilization: Optional[float] = None
    picard_max: int = 1
    picard_tol: float = 1e-9
    yosida_lambda: Optional[float] = None
    clamp_sigma: bool = False
    cg_rtol: float = 1e-14
    cg_max_iter: int = 100000

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 1:
            raise ValueError("dt must be > 0 and n_steps >= 1")
        if self.picard_max < 1 or self.picard_tol <= 0:
            raise ValueError("picard_max >= 1 and picard_tol > 0 required")
        if self.stabilization is not None and self.stabilization < 0:
            raise ValueError("stabilization must be >= 0")
        if self.yosida_lambda is not None and self.yosida_lambda <= 0:
            raise ValueError("yosida_lambda must be positive")

    @property
    def T(self):
        return self.dt * self.n_steps

    def resolved_stabilization(self, params: ModelParams):
        return (2.0 * params.B if self.stabilization is None
                else self.stabilization)


@dataclass(frozen=True)
class StateSnapshot:
    phi: ScalarField
    mu: ScalarField
    sigma: ScalarField
    t: float


@dataclass
class Trajectory:
    """Record of one sample path: states, frozen iterates, diagnostics.

    ``phi``, ``mu``, ``sigma`` hold the snapshots at ``stored_steps``
    (every step when stride is 1).  ``phi_star``/``sigma_star`` are the
    h/H evaluation points used by each accepted step; they exist only for
    stride-1 runs, which is what the tangent and adjoint sweeps require.
    """

    grid: Grid
    params: ModelParams
    config: SolverConfig
    times: np.ndarray
    stored_steps: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    path: NoisePath
    controls: ControlPair
    mult_spec: Optional[MultiplicativeNoiseSpec]
    diagnostics: dict = dc_field(default_factory=dict)
    phi_star: Optional[np.ndarray] = None
    sigma_star: Optional[np.ndarray] = None

    @property
    def n_steps(self):
        return self.config.n_steps

    @property
    def is_full(self):
        return self.stored_steps.size == self.n_steps + 1

    def require_full(self, who):
        if not self.is_full or self.phi_star is None:
            raise BaseTrajectoryMismatch(
                f"{who} needs a stride-1 trajectory with stored iterates")

    def snapshot(self, n) -> StateSnapshot:
        where = np.nonzero(self.stored_steps == n)[0]
        if where.size == 0:
            raise StepMismatch(f"step {n} is not stored (stride > 1)")
        k = int(where[0])
        return StateSnapshot(phi=ScalarField(self.grid, self.phi[k]),
                             mu=ScalarField(self.grid, self.mu[k]),
                             sigma=ScalarField(self.grid, self.sigma[k]),
                             t=float(self.times[n]))


@dataclass
class StepResult:
    phi: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    phi_star: np.ndarray
    sigma_star: np.ndarray
    clamped_mass: float
    source_mean: float
    picard_iters: int
    picard_residuals: list


class Stepper:
    """Applies one semi-implicit step; shared by forward/tangent/adjoint."""

    def __init__(self, grid: Grid, params: ModelParams, config: SolverConfig,
                 mult_spec: Optional[MultiplicativeNoiseSpec] = None):
        self.grid = grid
        self.params = params
        self.config = config
        self.mult_spec = mult_spec
        self.S = config.resolved_stabilization(params)
        lam = grid.neumann_eigenvalues()
        self.phase_symbol = (1.0 + config.dt * params.A * lam * lam
                             + config.dt * self.S * lam)
        self.basis = (ModeBasis(grid, mult_spec.n_modes)
                      if mult_spec is not None and mult_spec.active else None)

    # Nonlinearity hooks honoring Yosida mode
    def psi_prime(self, r):
        lam = self.config.yosida_lambda
        return (potential.psi_prime(r) if lam is None
                else potential.yosida_psi_prime(r, lam))

    def psi_pp(self, r):
        lam = self.config.yosida_lambda
        return (potential.psi_pp(r) if lam is None
                else potential.yosida_psi_pp(r, lam))

    def solve_phase(self, rhs):
        """Apply (I + dt*A*lap^2 - dt*S*lap)^{-1} in the cosine basis."""
        return self.grid.idct(self.grid.dct(rhs) / self.phase_symbol)

    def solve_nutrient(self, h_phi, rhs, x0=None):
        """CG solve of (I + dt(-lap + c*h(phi) + b)) v = rhs."""
        dt = self.config.dt
        react = 1.0 + dt * (self.params.c * h_phi + self.params.b)

        def op(v):
            return react * v - dt * self.grid.lap(v)

        try:
            return cg_solve(op, rhs, rhs if x0 is None else x0,
                            rtol=self.config.cg_rtol, atol=1e-300,
                            max_iter=self.config.cg_max_iter,
                            norm=self.grid.norm)
        except NoConvergence as exc:
            raise LinearSolveFailure(f"nutrient solve failed: {exc}")

    def assemble_mu(self, phi):
        return (-self.params.A * self.grid.lap(phi)
                + self.params.B * self.psi_prime(phi))

    def noise_field(self, sigma_star, w2_inc):
        if self.basis is None:
            return 0.0
        return multiplicative_field(self.mult_spec, self.basis,
                                    sigma_star, w2_inc)

    def _one_pass(self, phi_n, sigma_n, u_n, w_n, add_inc, w2_inc,
                  phi_star, sigma_star):
        p, cfg, g = self.params, self.config, self.grid
        dt = cfg.dt
        h_star = potential.h(phi_star)
        rhs_sigma = (sigma_n + dt * p.b * w_n
                     + self.noise_field(sigma_star, w2_inc))
        sigma_new = self.solve_nutrient(h_star, rhs_sigma)
        clamped_mass = 0.0
        if cfg.clamp_sigma:
            clipped = np.clip(sigma_new, 0.0, 1.0)
            clamped_mass = g.integral(np.abs(sigma_new - clipped))
            sigma_new = clipped
        source = (p.P * sigma_new - p.a - p.alpha * u_n) * h_star
        rhs_phi = (phi_n + dt * g.lap(p.B * self.psi_prime(phi_n))
                   - dt * self.S * g.lap(phi_n) + dt * source + add_inc)
        phi_new = self.solve_phase(rhs_phi)
        return phi_new, sigma_new, clamped_mass, g.mean(source)

    def step(self, phi_n, sigma_n, u_n, w_n, add_inc, w2_inc) -> StepResult:
        """One accepted step, including the optional coupling iteration.

        With picard_max = 1 this is the plain scheme (h and H frozen at
        the step start).  With picard_max > 1 the pass is re-run with the
        evaluation points moved to the latest iterate until successive
        iterates differ by less than picard_tol in the H-norm.
        """
        cfg = self.config
        stars = (phi_n, sigma_n)
        prev = None
        residuals = []
        for j in range(cfg.picard_max):
            out = self._one_pass(phi_n, sigma_n, u_n, w_n, add_inc, w2_inc,
                                 *stars)
            phi_new, sigma_new, clamped_mass, source_mean = out
            if prev is not None:
                r = max(self.grid.norm(phi_new - prev[0]),
                        self.grid.norm(sigma_new - prev[1]))
                residuals.append(r)
                if r < cfg.picard_tol:
                    break
            if j + 1 == cfg.picard_max:
                if cfg.picard_max > 1:
                    raise PicardNoConvergence(
                        f"coupling iteration above tolerance after "
                        f"{cfg.picard_max} passes "
                        f"(last residual {residuals[-1]:.3e})",
                        residual=residuals[-1])
                break
            prev = (phi_new, sigma_new)
            stars = (phi_new, sigma_new)
        if not (np.isfinite(phi_new).all() and np.isfinite(sigma_new).all()):
            raise NonFiniteState("state left the finite range")
        return StepResult(phi=phi_new, sigma=sigma_new,
                          mu=self.assemble_mu(phi_new),
                          phi_star=stars[0], sigma_star=stars[1],
                          clamped_mass=clamped_mass, source_mean=source_mean,
                          picard_iters=j + 1, picard_residuals=residuals)


def simulate(phi0: ScalarField, sigma0: ScalarField, controls: ControlPair,
             path: NoisePath, params: ModelParams, config: SolverConfig,
             mult_spec: Optional[MultiplicativeNoiseSpec] = None,
             stride: int = 1, bypass: bool = False) -> Trajectory:
    """Integrate one sample path; deterministic given its arguments."""
    grid = phi0.grid
    if sigma0.grid != grid:
        raise StepMismatch("phi0 and sigma0 live on different grids")
    params.validate(bypass=bypass)
    controls.check_grid(grid, config.n_steps)
    controls.validate_box(bypass=bypass)
    if not bypass and (sigma0.values.min() < 0 or sigma0.values.max() > 1):
        raise ConfigInvalid("A7", "sigma0 must lie in [0,1] a.e.")
    if path.n_steps != config.n_steps:
        raise StepMismatch(
            f"noise path has {path.n_steps} steps, config {config.n_steps}")
    if abs(path.dt - config.dt) > 1e-12 * config.dt:
        raise StepMismatch("noise path dt differs from solver dt")
    m2 = mult_spec.n_modes if (mult_spec is not None
                               and mult_spec.active) else 0
    if path.w2.shape[1] < m2:
        raise StepMismatch(
            f"path carries {path.w2.shape[1]} W2 modes, spec needs {m2}")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    stepper = Stepper(grid, params, config, mult_spec)
    n_steps = config.n_steps
    keep = sorted(set(range(0, n_steps + 1, stride)) | {0, n_steps})
    keep_pos = {n: k for k, n in enumerate(keep)}
    full = stride == 1

    phi_out = np.zeros((len(keep),) + grid.shape)
    mu_out = np.zeros_like(phi_out)
    sigma_out = np.zeros_like(phi_out)
    phi_star = np.zeros((n_steps,) + grid.shape) if full else None
    sigma_star = np.zeros((n_steps,) + grid.shape) if full else None

    diag = {
        "mass": np.zeros(n_steps + 1),
        "phi_norm": np.zeros(n_steps + 1),
        "energy": np.zeros(n_steps + 1),
        "sigma_mean": np.zeros(n_steps + 1),
        "sigma_min": np.zeros(n_steps + 1),
        "sigma_max": np.zeros(n_steps + 1),
        "mass_residual": np.zeros(n_steps),
        "clamped_mass": np.zeros(n_steps),
        "picard_iters": np.zeros(n_steps, dtype=int),
        "picard_residual": np.zeros(n_steps),
    }

    phi = phi0.values.copy()
    sigma = sigma0.values.copy()
    mu = stepper.assemble_mu(phi)

    def record(n, phi, mu, sigma):
        diag["mass"][n] = grid.mean(phi)
        diag["phi_norm"][n] = grid.norm(phi)
        diag["energy"][n] = free_energy_values(grid, phi, params.A, params.B)
        diag["sigma_mean"][n] = grid.mean(sigma)
        diag["sigma_min"][n] = sigma.min()
        diag["sigma_max"][n] = sigma.max()
        if n in keep_pos:
            k = keep_pos[n]
            phi_out[k] = phi
            mu_out[k] = mu
            sigma_out[k] = sigma

    record(0, phi, mu, sigma)
    for n in range(n_steps):
        w2_inc = path.w2[n, :m2] if m2 else path.w2[n]
        try:
            res = stepper.step(phi, sigma, controls.u[n], controls.w[n],
                               path.additive[n], w2_inc)
        except (LinearSolveFailure, PicardNoConvergence,
                NonFiniteState) as exc:
            exc.args = (f"step {n}: {exc.args[0]}",) + exc.args[1:]
            raise
        diag["mass_residual"][n] = abs(
            grid.mean(res.phi) - grid.mean(phi)
            - config.dt * res.source_mean - grid.mean(path.additive[n]))
        diag["clamped_mass"][n] = res.clamped_mass
        diag["picard_iters"][n] = res.picard_iters
        diag["picard_residual"][n] = (res.picard_residuals[-1]
                                      if res.picard_residuals else 0.0)
        if full:
            phi_star[n] = res.phi_star
            sigma_star[n] = res.sigma_star
        phi, sigma, mu = res.phi, res.sigma, res.mu
        record(n + 1, phi, mu, sigma)

    return Trajectory(
        grid=grid, params=params, config=config,
        times=np.arange(n_steps + 1) * config.dt,
        stored_steps=np.asarray(keep), phi=phi_out, mu=mu_out,
        sigma=sigma_out, path=path, controls=controls, mult_spec=mult_spec,
        diagnostics=diag, phi_star=phi_star, sigma_star=sigma_star)


def yosida_convergence_study(phi0, sigma0, controls, path, params, config,
                             lambdas, mult_spec=None, bypass=False):
    """Max-over-time H-gap of the lambda-regularized run to the plain run.

    Both runs share the same noise path.  Returns [(lambda, gap)] in the
    given order; lambdas must be positive and decreasing.
    """
    lams = [float(x) for x in lambdas]
    if any(x <= 0 for x in lams):
        raise ValueError("lambdas must be positive")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambdas must be strictly decreasing")
    if config.yosida_lambda is not None:
        raise ValueError("pass the plain config; lambdas are supplied here")
    base = simulate(phi0, sigma0, controls, path, params, config,
                    mult_spec=mult_spec, bypass=bypass)
    rows = []
    for lam in lams:
        cfg = SolverConfig(
            dt=config.dt, n_steps=config.n_steps,
            stabilization=config.stabilization,
            picard_max=config.picard_max, picard_tol=config.picard_tol,
            yosida_lambda=lam, clamp_sigma=config.clamp_sigma,
            cg_rtol=config.cg_rtol, cg_max_iter=config.cg_max_iter)
        reg = simulate(phi0, sigma0, controls, path, params, cfg,
                       mult_spec=mult_spec, bypass=bypass)
        gap = max(base.grid.norm(reg.phi[n] - base.phi[n])
                  for n in range(config.n_steps + 1))
        rows.append((lam, gap))
    return rows
