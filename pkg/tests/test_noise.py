"""Q-Wiener drivers: covariance, determinism, switch-off at the bounds."""

import copy

import numpy as np
import pytest

import tumorctrl as tc
from tumorctrl.noise import ModeBasis, envelope, multiplicative_field

from util import add_spec


def test_mode_basis_orthonormal():
    g = tc.Grid([12, 8], [1.0, 1.0])
    basis = ModeBasis(g, 10)
    for i in range(10):
        ei = basis.mode_field(i)
        for j in range(i, 10):
            ej = basis.mode_field(j)
            want = 1.0 if i == j else 0.0
            assert g.inner(ei, ej) == pytest.approx(want, abs=1e-12)
    # eigenvalues ascend
    assert np.all(np.diff(basis.eigenvalues) >= -1e-12)


def test_additive_zero_amplitude():
    g = tc.Grid([16], [1.0])
    rng = tc.path_rng(1, 0)
    inc = tc.sample_additive_increment(
        tc.AdditiveNoiseSpec(g0=0.0, s=2.0, n_modes=4), g, 0.1, rng)
    assert np.all(inc.values == 0.0)


def test_additive_determinism_snapshot():
    g = tc.Grid([16], [1.0])
    spec = add_spec(g0=0.3)
    rng = tc.path_rng(7, 3)
    snap = copy.deepcopy(rng)
    a = tc.sample_additive_increment(spec, g, 0.05, rng)
    b = tc.sample_additive_increment(spec, g, 0.05, snap)
    assert np.array_equal(a.values, b.values)


def test_additive_mode_variance():
    # var of <e_k, increment> over draws ~ g_k^2 dt, within 3 standard errors
    g = tc.Grid([16], [1.0])
    spec = tc.AdditiveNoiseSpec(g0=0.5, s=2.5, n_modes=5)
    dt = 0.02
    basis = ModeBasis(g, 5)
    gk = spec.coefficients(basis.eigenvalues)
    n_draws = 20000
    rng = tc.path_rng(11, 0)
    coeffs = np.zeros((n_draws, 5))
    for i in range(n_draws):
        inc = tc.sample_additive_increment(spec, g, dt, rng)
        spectral = g.dct(inc.values) * np.sqrt(g.cell_volume)
        coeffs[i] = [spectral[t] for t in basis.indices]
    var = coeffs.var(axis=0, ddof=1)
    want = gk ** 2 * dt
    se = want * np.sqrt(2.0 / (n_draws - 1))
    assert np.all(np.abs(var - want) <= 3 * se)


def test_additive_dt_scaling():
    g = tc.Grid([16], [1.0])
    spec = add_spec(g0=1.0, n_modes=3)
    basis = ModeBasis(g, 3)
    n_draws = 4000
    stds = []
    for ix, dt in enumerate((0.01, 0.04)):
        rng = tc.path_rng(13, ix)
        c0 = np.array([basis.coefficient(
            tc.sample_additive_increment(spec, g, dt, rng).values, 0)
            for _ in range(n_draws)])
        stds.append(c0.std(ddof=1))
    ratio = stds[1] / stds[0]
    assert abs(ratio - 2.0) < 0.15


def test_additive_step_independence():
    g = tc.Grid([16], [1.0])
    spec = add_spec(g0=1.0, n_modes=3)
    path = tc.generate_path(g, spec, tc.MultiplicativeNoiseSpec(0, 0.5, 0),
                            0.01, 2000, 5, 0)
    basis = ModeBasis(g, 3)
    c = np.array([basis.coefficient(path.additive[n], 0)
                  for n in range(path.n_steps)])
    r = np.corrcoef(c[:-1], c[1:])[0, 1]
    assert abs(r) <= 3.0 / np.sqrt(c.size - 1)


def test_multiplicative_switches_off_at_bounds():
    g = tc.Grid([16], [1.0])
    spec = tc.MultiplicativeNoiseSpec(c0=2.0, q=0.5, n_modes=4)
    rng = tc.path_rng(3, 0)
    for value in (0.0, 1.0):
        inc = tc.apply_multiplicative_increment(
            spec, tc.as_field(g, value), 0.1, rng)
        assert np.all(inc.values == 0.0)
    # pointwise: vanishes exactly wherever sigma is outside (0,1)
    sigma = np.linspace(-0.5, 1.5, 16)
    inc = tc.apply_multiplicative_increment(
        spec, tc.ScalarField(g, sigma), 0.1, rng)
    outside = (sigma <= 0.0) | (sigma >= 1.0)
    assert np.all(inc.values[outside] == 0.0)
    assert np.any(inc.values[~outside] != 0.0)


def test_multiplicative_zero_amplitude():
    g = tc.Grid([16], [1.0])
    rng = tc.path_rng(3, 1)
    inc = tc.apply_multiplicative_increment(
        tc.MultiplicativeNoiseSpec(c0=0.0, q=0.5, n_modes=4),
        tc.as_field(g, 0.5), 0.1, rng)
    assert np.all(inc.values == 0.0)


def test_multiplicative_half_sigma_norm():
    # sigma = 1/2: E|inc|_H^2 = (dt/16) sum c_n^2
    g = tc.Grid([16], [1.0])
    spec = tc.MultiplicativeNoiseSpec(c0=1.5, q=0.6, n_modes=5)
    dt = 0.04
    rng = tc.path_rng(17, 0)
    n_draws = 20000
    sq = np.zeros(n_draws)
    half = tc.as_field(g, 0.5)
    for i in range(n_draws):
        inc = tc.apply_multiplicative_increment(spec, half, dt, rng)
        sq[i] = g.inner(inc.values, inc.values)
    want = dt / 16.0 * np.sum(spec.coefficients() ** 2)
    se = sq.std(ddof=1) / np.sqrt(n_draws)
    assert abs(sq.mean() - want) <= 3 * se


def test_path_reproducibility_and_parallel_keys():
    g = tc.Grid([12], [1.0])
    aspec = add_spec(g0=0.2, n_modes=4)
    mspec = tc.MultiplicativeNoiseSpec(c0=0.5, q=0.5, n_modes=3)
    p1 = tc.generate_path(g, aspec, mspec, 0.01, 10, 99, 4)
    p2 = tc.generate_path(g, aspec, mspec, 0.01, 10, 99, 4)
    assert np.array_equal(p1.additive, p2.additive)
    assert np.array_equal(p1.w2, p2.w2)
    other = tc.generate_path(g, aspec, mspec, 0.01, 10, 99, 5)
    assert not np.array_equal(p1.additive, other.additive)


def test_path_serialization_roundtrip(tmp_path):
    g = tc.Grid([8], [1.0])
    aspec = add_spec(g0=0.2, n_modes=4)
    mspec = tc.MultiplicativeNoiseSpec(c0=0.5, q=0.5, n_modes=3)
    p = tc.generate_path(g, aspec, mspec, 0.01, 5, 1, 2)
    d = tmp_path / "path"
    from tumorctrl.noise import load_path, save_path
    save_path(d, g, p)
    back = load_path(d, g)
    assert np.array_equal(back.additive, p.additive)
    assert np.array_equal(back.w2, p.w2)
    assert back.dt == p.dt


def test_validators_report_sums():
    g = tc.Grid([32], [1.0])
    aspec = tc.AdditiveNoiseSpec(g0=1.0, s=3.0, n_modes=8)
    rep = aspec.validate(g)
    assert rep["hs_v_sum_truncated"] > 0
    assert rep["tail_mass"] >= 0
    mspec = tc.MultiplicativeNoiseSpec(c0=2.0, q=0.5, n_modes=6)
    rep = mspec.validate()
    assert rep["lipschitz_sq_sum"] == pytest.approx(4.0 / (1 - 0.25))
    assert rep["lipschitz_sq_sum_truncated"] <= rep["lipschitz_sq_sum"]
    with pytest.raises(ValueError):
        tc.AdditiveNoiseSpec(g0=1.0, s=0.5, n_modes=4)
    with pytest.raises(ValueError):
        tc.MultiplicativeNoiseSpec(c0=1.0, q=1.5, n_modes=4)


def test_envelope_and_field_assembly():
    g = tc.Grid([16], [1.0])
    spec = tc.MultiplicativeNoiseSpec(c0=1.0, q=0.5, n_modes=3)
    basis = ModeBasis(g, 3)
    sigma = np.linspace(0.1, 0.9, 16)
    w2 = np.array([0.3, -0.2, 0.1])
    built = multiplicative_field(spec, basis, sigma, w2)
    manual = np.zeros(16)
    for n in range(3):
        hn = spec.coefficients()[n] * envelope(sigma)
        manual += hn * w2[n] * basis.mode_field(n)
    assert np.allclose(built, manual, atol=1e-14)
