"""Tangent sweep: linearity, mass identity, divided-difference remainder."""

import numpy as np
import pytest

import tumorctrl as tc
from tumorctrl.sensitivity import observed_orders, solve_tangent, \
    space_time_norm

from util import (random_direction, smoke_config, smoke_grid, smoke_params,
                  smoke_path, smoke_state, smoke_trajectory)


def test_zero_direction_gives_zero_tangent():
    traj = smoke_trajectory()
    tan = solve_tangent(traj, 0.0, 0.0)
    assert np.all(tan.x == 0.0)
    assert np.all(tan.z == 0.0)


def test_tangent_is_linear():
    traj = smoke_trajectory()
    rng = np.random.default_rng(1)
    d1 = random_direction(traj.grid, traj.n_steps, rng)
    d2 = random_direction(traj.grid, traj.n_steps, rng)
    t1 = solve_tangent(traj, d1.u, d1.w)
    t2 = solve_tangent(traj, d2.u, d2.w)
    doubled = solve_tangent(traj, 2 * d1.u, 2 * d1.w)
    summed = solve_tangent(traj, d1.u + d2.u, d1.w + d2.w)
    assert np.allclose(doubled.x, 2 * t1.x, atol=1e-12)
    assert np.allclose(summed.x, t1.x + t2.x, atol=1e-12)
    assert np.allclose(summed.z, t1.z + t2.z, atol=1e-12)


def test_control_decoupling_gives_zero_tangent():
    # alpha = 0 and k_w = 0: the direction never enters the linear system
    grid = smoke_grid()
    params = smoke_params(alpha=0.0)  # degenerate: needs validation bypass
    cfg = smoke_config()
    phi0, sigma0 = smoke_state(grid)
    ctrl = tc.constant_controls(grid, cfg.n_steps, 0.5, 0.5)
    traj = tc.simulate(phi0, sigma0, ctrl, smoke_path(grid, cfg), params,
                       cfg, bypass=True)
    rng = np.random.default_rng(2)
    k_u = rng.uniform(-1, 1, (cfg.n_steps,) + grid.shape)
    tan = solve_tangent(traj, k_u, 0.0)
    assert np.all(tan.x == 0.0)
    assert np.all(tan.z == 0.0)


def test_tangent_mass_identity():
    traj = smoke_trajectory()
    rng = np.random.default_rng(3)
    d = random_direction(traj.grid, traj.n_steps, rng)
    tan = solve_tangent(traj, d.u, d.w)
    g, dt = traj.grid, traj.config.dt
    for n in range(traj.n_steps):
        lhs = g.mean(tan.x[n + 1]) - g.mean(tan.x[n])
        rhs = dt * tan.source_mean[n]
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_gateaux_remainder_decays_first_order():
    grid = smoke_grid()
    params = smoke_params()
    cfg = smoke_config()
    phi0, sigma0 = smoke_state(grid)
    ctrl = tc.constant_controls(grid, cfg.n_steps, 0.5, 0.5)
    rng = np.random.default_rng(4)
    d = random_direction(grid, cfg.n_steps, rng)
    rows = tc.gateaux_check(phi0, sigma0, ctrl, d, [1e-1, 1e-2, 1e-3],
                            smoke_path(grid, cfg), params, cfg)
    orders = observed_orders(rows)
    assert min(orders) >= 0.9
    zero_rows = tc.gateaux_check(
        phi0, sigma0, ctrl,
        tc.ControlPair(np.zeros_like(d.u), np.zeros_like(d.w)),
        [1e-2], smoke_path(grid, cfg), params, cfg)
    assert zero_rows[0][1] == 0.0


def test_gateaux_noise_insensitive():
    # additive noise cancels in the divided difference; the remainder
    # reacts only through the noise's tilt of the base trajectory, so the
    # deterministic and stochastic tables agree to a small relative gap
    grid = smoke_grid()
    params = smoke_params()
    cfg = smoke_config()
    phi0, sigma0 = smoke_state(grid)
    ctrl = tc.constant_controls(grid, cfg.n_steps, 0.5, 0.5)
    rng = np.random.default_rng(5)
    d = random_direction(grid, cfg.n_steps, rng)
    eps = [1e-1, 1e-2]
    noisy = tc.gateaux_check(phi0, sigma0, ctrl, d, eps,
                             smoke_path(grid, cfg, g0=1e-3), params, cfg)
    clean = tc.gateaux_check(phi0, sigma0, ctrl, d, eps,
                             tc.zero_path(grid, cfg.dt, cfg.n_steps),
                             params, cfg)
    for (_, rn), (_, rc) in zip(noisy, clean):
        assert abs(rn - rc) <= 0.05 * rc


def test_tangent_requires_full_trajectory_and_h_zero():
    grid = smoke_grid()
    params = smoke_params()
    cfg = smoke_config()
    phi0, sigma0 = smoke_state(grid)
    ctrl = tc.constant_controls(grid, cfg.n_steps, 0.5, 0.5)
    strided = tc.simulate(phi0, sigma0, ctrl, smoke_path(grid, cfg), params,
                          cfg, stride=4)
    with pytest.raises(tc.BaseTrajectoryMismatch):
        solve_tangent(strided, 1.0, 1.0)
    mult = tc.MultiplicativeNoiseSpec(c0=0.5, q=0.5, n_modes=3)
    path = tc.generate_path(grid, tc.AdditiveNoiseSpec(0.01, 2.0, 4), mult,
                            cfg.dt, cfg.n_steps, 6, 0)
    cfg_clamp = smoke_config(clamp_sigma=True)
    noisy = tc.simulate(phi0, sigma0, ctrl, path, params, cfg_clamp,
                        mult_spec=mult)
    with pytest.raises(tc.ConfigInvalid) as err:
        solve_tangent(noisy, 1.0, 1.0)
    assert err.value.assumption == "H0"


def test_space_time_norm_constant_field():
    grid = smoke_grid()
    dt = 0.1
    fields = np.ones((5,) + grid.shape)
    # trapezoid over 4 steps of a constant: T * |D| with T = 0.4
    assert space_time_norm(grid, dt, fields) == pytest.approx(
        np.sqrt(0.4 * grid.volume))
