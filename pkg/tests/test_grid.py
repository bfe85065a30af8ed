"""Grid operators: stencil identities, inverse-Neumann solve, dual norm."""

import numpy as np
import pytest

import tumorctrl as tc
from tumorctrl.errors import GridMismatch, NonZeroMean

from util import cosine_field


def reference_lap_1d(values, dx):
    """Independent stencil oracle: reflected ghosts, centered differences."""
    padded = np.concatenate([[values[0]], values, [values[-1]]])
    return (padded[:-2] - 2 * padded[1:-1] + padded[2:]) / dx ** 2


def grids():
    return [tc.Grid([64], [1.0]), tc.Grid([16, 12], [1.0, 0.75])]


def random_values(grid, rng):
    return rng.normal(size=grid.shape)


def test_grid_invariants():
    g = tc.Grid([8, 6], [2.0, 3.0])
    assert g.dim == 2
    assert g.cell_volume * g.size == pytest.approx(g.volume)
    with pytest.raises(ValueError):
        tc.Grid([3], [1.0])
    with pytest.raises(ValueError):
        tc.Grid([8], [-1.0])


def test_laplacian_constant_is_zero():
    for g in grids():
        lap = g.lap(np.full(g.shape, 4.2))
        assert np.max(np.abs(lap)) == 0.0


def test_laplacian_cosine_eigenfield():
    g = tc.Grid([64], [2.0])
    dx = g.spacings[0]
    f = np.cos(np.pi * g.axis_centers(0) / g.lengths[0])
    lam = (2.0 / dx ** 2) * (1.0 - np.cos(np.pi * dx / g.lengths[0]))
    assert np.allclose(g.lap(f), -lam * f, atol=1e-12)
    assert np.allclose(g.lap(f), reference_lap_1d(f, dx), atol=1e-13)


def test_laplacian_mean_zero():
    rng = np.random.default_rng(0)
    for g in grids():
        for _ in range(20):
            f = random_values(g, rng)
            assert abs(g.mean(g.lap(f))) <= 1e-11 * (1.0 + g.norm(f))


def test_summation_by_parts_symmetry():
    rng = np.random.default_rng(1)
    for g in grids():
        for _ in range(20):
            f = random_values(g, rng)
            h = random_values(g, rng)
            a = g.inner(g.lap(f), h)
            b = g.inner(f, g.lap(h))
            assert abs(a - b) <= 1e-12 * (1.0 + abs(a))


def test_mean_cases():
    g = tc.Grid([8], [1.0])
    assert g.mean(np.full(8, 3.0)) == 3.0
    half = np.array([0.0] * 4 + [1.0] * 4)
    assert g.mean(half) == 0.5
    rng = np.random.default_rng(2)
    f = rng.normal(size=8)
    assert abs(g.mean(f - g.mean(f))) < 1e-15


def test_inner_and_grad_norm():
    g = tc.Grid([32], [1.0])
    rng = np.random.default_rng(3)
    f = rng.normal(size=32)
    assert g.inner(f, f) >= 0
    assert g.inner(np.zeros(32), np.zeros(32)) == 0.0
    assert g.grad_norm_sq(np.full(32, 7.0)) == 0.0
    # summation-by-parts pairing of the one-sided gradient with the stencil
    assert g.inner(-g.lap(f), f) == pytest.approx(g.grad_norm_sq(f),
                                                  rel=1e-13)
    g2 = tc.Grid([16], [1.0])
    with pytest.raises(GridMismatch):
        tc.inner(tc.as_field(g, 0.0), tc.as_field(g2, 0.0))


def test_neumann_inverse_zero_and_eigenfield():
    g = tc.Grid([64], [1.0])
    z = g.neumann_inverse(np.zeros(64))
    assert np.all(z == 0.0)
    f = cosine_field(g, 1.0, mode=3).values
    lam = g.axis_eigenvalues(0)[3]
    z = g.neumann_inverse(f)
    assert np.allclose(z, f / lam, atol=1e-10)


def test_neumann_inverse_right_inverse_and_mean_guard():
    rng = np.random.default_rng(4)
    for g in grids():
        y = random_values(g, rng)
        y -= y.mean()
        z = g.neumann_inverse(y)
        assert g.norm(-g.lap(z) - y) <= 1e-9 * g.norm(y)
        assert abs(g.mean(z)) < 1e-12
        with pytest.raises(NonZeroMean):
            g.neumann_inverse(y + 1.0)


def test_vstar_norm_constant_and_eigenfield():
    g = tc.Grid([64], [1.0])
    assert g.vstar_norm(np.full(64, -2.5)) == pytest.approx(2.5)
    f = cosine_field(g, 0.7, mode=2).values
    lam = g.axis_eigenvalues(0)[2]
    # N f = f/lam so |grad N f|^2 = <f, f>/lam
    assert g.vstar_norm(f) == pytest.approx(g.norm(f) / np.sqrt(lam),
                                            rel=1e-8)


def test_vstar_norm_dominated_by_h_norm():
    # Poincare bound: |y|_*^2 <= max(1, 1/lambda_1) |y|_H^2
    rng = np.random.default_rng(5)
    for g in grids():
        lam1 = min(g.axis_eigenvalues(ax)[1] for ax in range(g.dim))
        C = np.sqrt(max(1.0, 1.0 / lam1))
        for _ in range(10):
            y = random_values(g, rng)
            assert g.vstar_norm(y) <= C * g.norm(y) * (1 + 1e-10)


def test_scalar_field_validation():
    g = tc.Grid([8], [1.0])
    with pytest.raises(GridMismatch):
        tc.ScalarField(g, np.zeros(9))
    with pytest.raises(ValueError):
        tc.ScalarField(g, np.full(8, np.nan))
    f = tc.as_field(g, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0  # immutable


def test_field_roundtrip_binary_and_csv(tmp_path):
    g = tc.Grid([6, 4], [1.5, 1.0])
    rng = np.random.default_rng(6)
    f = tc.ScalarField(g, rng.normal(size=g.shape))
    p = tmp_path / "f.pfb"
    tc.save_field(p, f)
    back = tc.load_field(p)
    assert back.grid.shape == g.shape
    assert np.array_equal(back.values, f.values)
    csv_path = tmp_path / "f.csv"
    tc.field_to_csv(csv_path, f)
    rows = csv_path.read_text().strip().split("\n")
    assert rows[0] == "i,j,value"
    assert len(rows) == 1 + g.size
    i, j, v = rows[1].split(",")
    assert float(v) == f.values[int(i), int(j)]


def test_field_load_rejects_corruption(tmp_path):
    g = tc.Grid([6], [1.0])
    p = tmp_path / "f.pfb"
    tc.save_field(p, tc.as_field(g, 1.0))
    raw = bytearray(p.read_bytes())
    raw[0] = ord("X")
    bad = tmp_path / "bad.pfb"
    bad.write_bytes(bytes(raw))
    with pytest.raises(tc.ArtifactIOError):
        tc.load_field(bad)
    short = tmp_path / "short.pfb"
    short.write_bytes(p.read_bytes()[:40])
    with pytest.raises(tc.ArtifactIOError):
        tc.load_field(short)
