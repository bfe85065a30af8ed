"""Shared builders for the test suite: the smoke configuration and friends."""

import numpy as np

import tumorctrl as tc


def smoke_grid(n=32):
    return tc.Grid([n], [1.0])


def smoke_params(**over):
    base = dict(P=0.5, a=0.1, alpha=0.8, b=0.5, c=0.4, A=0.01, B=1.0)
    base.update(over)
    return tc.ModelParams(**base)


def smoke_config(dt=0.02, n_steps=16, **over):
    return tc.SolverConfig(dt=dt, n_steps=n_steps, **over)


def cosine_field(grid, amplitude=0.3, mode=1, offset=0.0):
    values = np.full(grid.shape, amplitude)
    for ax in range(grid.dim):
        x = grid.axis_centers(ax)
        sh = [1] * grid.dim
        sh[ax] = grid.shape[ax]
        values = values * np.cos(
            np.pi * mode * x / grid.lengths[ax]).reshape(sh)
    return tc.ScalarField(grid, values + offset)


def smoke_state(grid):
    return cosine_field(grid, 0.3), tc.as_field(grid, 0.5)


def smoke_cost(grid):
    return tc.CostSpec(beta1=1.0, beta2=0.5, beta3=0.1, beta4=1.0,
                       beta5=1.0, phi_Q=np.full(grid.shape, -0.4),
                       phi_T=np.full(grid.shape, -0.6))


def add_spec(g0=0.01, s=2.0, n_modes=6):
    return tc.AdditiveNoiseSpec(g0=g0, s=s, n_modes=n_modes)


def mult_off():
    return tc.MultiplicativeNoiseSpec(c0=0.0, q=0.5, n_modes=0)


def smoke_path(grid, config, seed=42, index=0, g0=0.01):
    return tc.generate_path(grid, add_spec(g0=g0), mult_off(), config.dt,
                            config.n_steps, seed, index)


def smoke_trajectory(grid=None, seed=42, g0=0.01, **config_over):
    grid = grid or smoke_grid()
    params = smoke_params()
    config = smoke_config(**config_over)
    phi0, sigma0 = smoke_state(grid)
    controls = tc.constant_controls(grid, config.n_steps, 0.5, 0.5)
    path = smoke_path(grid, config, seed=seed, g0=g0)
    traj = tc.simulate(phi0, sigma0, controls, path, params, config)
    return traj


def random_direction(grid, n_steps, rng, scale=1.0):
    shape = (n_steps,) + grid.shape
    return tc.ControlPair(scale * rng.uniform(-1, 1, shape),
                          scale * rng.uniform(-1, 1, shape))
