"""Sampling of the two independent Wiener drivers.

Both covariances are built on the L^2-orthonormal eigenfields of the
discrete Neumann Laplacian (the DCT-II basis scaled by 1/sqrt(cell
volume)).  The additive driver damps mode j by (1 + lambda_j)^(-s/2); the
multiplicative driver acts through h_n(r) = c0*q^n * r(1-r) clamped to
[0,1], so it switches off exactly where the nutrient touches its bounds.

Paths use counter-based Philox streams keyed by (master_seed, path_index),
so ensembles are order-independent and parallel-safe.  Per step the stream
yields first the additive-mode normals, then the multiplicative-mode
normals.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import fieldio
from .errors import ArtifactIOError, StepMismatch
from .grid import Grid, ScalarField


@dataclass(frozen=True)
class AdditiveNoiseSpec:
    """Spectrum of the additive phase-equation driver G dW1."""

    g0: float = 0.0
    s: float = 2.0
    n_modes: int = 0

    def __post_init__(self):
        if self.g0 < 0:
            raise ValueError("g0 must be >= 0")
        if self.s <= 1:
            raise ValueError("decay exponent s must be > 1")
        if self.n_modes < 0:
            raise ValueError("n_modes must be >= 0")

    @property
    def active(self):
        return self.g0 > 0 and self.n_modes > 0

    def coefficients(self, lam):
        return self.g0 * (1.0 + lam) ** (-0.5 * self.s)

    def validate(self, grid: Grid):
        """Hilbert-Schmidt sums over the truncated and remaining modes."""
        lam_all = np.sort(grid.neumann_eigenvalues().ravel())
        m = min(self.n_modes, lam_all.size)
        g_all = self.coefficients(lam_all)
        return {
            "hs_v_sum_truncated": float(np.sum(
                g_all[:m] ** 2 * (1.0 + lam_all[:m]))),
            "tail_mass": float(np.sum(g_all[m:] ** 2)),
            "n_modes_used": m,
        }


@dataclass(frozen=True)
class MultiplicativeNoiseSpec:
    """Mode functions h_n(r) = c0*q^n * clamp(r,0,1)*(1-clamp(r,0,1))."""

    c0: float = 0.0
    q: float = 0.5
    n_modes: int = 0

    def __post_init__(self):
        if self.c0 < 0:
            raise ValueError("c0 must be >= 0")
        if not 0.0 < self.q < 1.0:
            raise ValueError("ratio q must lie in (0,1)")
        if self.n_modes < 0:
            raise ValueError("n_modes must be >= 0")

    @property
    def active(self):
        return self.c0 > 0 and self.n_modes > 0

    def coefficients(self):
        return self.c0 * self.q ** np.arange(self.n_modes)

    def validate(self):
        """Sum of squared Lipschitz constants; finite in closed form."""
        full = self.c0 ** 2 / (1.0 - self.q ** 2)
        trunc = float(np.sum(self.coefficients() ** 2))
        return {"lipschitz_sq_sum": full, "lipschitz_sq_sum_truncated": trunc}


def envelope(sigma):
    """Shared pointwise factor clamp(r,0,1)*(1-clamp(r,0,1)) of every mode."""
    s = np.clip(np.asarray(sigma, dtype=float), 0.0, 1.0)
    return s * (1.0 - s)


class ModeBasis:
    """First n eigenfields of -lap on a grid, sorted by eigenvalue.

    Ties are broken lexicographically on the DCT multi-index, so the mode
    ordering is deterministic for a given grid.
    """

    def __init__(self, grid: Grid, n_modes: int):
        if n_modes > grid.size:
            raise ValueError(
                f"n_modes {n_modes} exceeds grid size {grid.size}")
        self.grid = grid
        self.n_modes = n_modes
        eig = grid.neumann_eigenvalues()
        idx = sorted(np.ndindex(*grid.shape),
                     key=lambda t: (eig[t], t))[:n_modes]
        self.indices = tuple(idx)
        self.eigenvalues = np.array([eig[t] for t in idx])

    def synthesize(self, coeffs):
        """Field sum_j coeffs[j] * e_j with e_j L^2-orthonormal."""
        spec = np.zeros(self.grid.shape)
        for t, c in zip(self.indices, np.asarray(coeffs, dtype=float)):
            spec[t] = c
        return self.grid.idct(spec) / np.sqrt(self.grid.cell_volume)

    def coefficient(self, values, j):
        """L^2 inner product of a field with mode e_j."""
        return float(self.grid.dct(values)[self.indices[j]]
                     * np.sqrt(self.grid.cell_volume))

    def mode_field(self, j):
        one = np.zeros(self.n_modes)
        one[j] = 1.0
        return self.synthesize(one)


def sample_additive_increment(spec: AdditiveNoiseSpec, grid: Grid, dt,
                              rng) -> ScalarField:
    """One increment G dW1: sum_j g_j sqrt(dt) xi_j e_j."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not spec.active:
        return ScalarField(grid, np.zeros(grid.shape))
    basis = ModeBasis(grid, spec.n_modes)
    g = spec.coefficients(basis.eigenvalues)
    xi = rng.standard_normal(spec.n_modes)
    return ScalarField(grid, basis.synthesize(g * np.sqrt(dt) * xi))


def multiplicative_field(spec: MultiplicativeNoiseSpec, basis: ModeBasis,
                         sigma, w2_scalars):
    """H(sigma) dW2 assembled from frozen per-mode scalar increments.

    Every mode shares the pointwise envelope, so the sum collapses to
    envelope(sigma) times one synthesized field.
    """
    if not spec.active:
        return np.zeros(basis.grid.shape)
    coeffs = spec.coefficients() * np.asarray(w2_scalars, dtype=float)
    return envelope(sigma) * basis.synthesize(coeffs)


def apply_multiplicative_increment(spec: MultiplicativeNoiseSpec,
                                   sigma: ScalarField, dt,
                                   rng) -> ScalarField:
    """One increment H(sigma) dW2 with freshly drawn mode normals."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = sigma.grid
    if not spec.active:
        return ScalarField(grid, np.zeros(grid.shape))
    basis = ModeBasis(grid, spec.n_modes)
    eta = rng.standard_normal(spec.n_modes) * np.sqrt(dt)
    return ScalarField(
        grid, multiplicative_field(spec, basis, sigma.values, eta))


def path_rng(master_seed, path_index):
    """Counter-based stream for one sample path."""
    key = np.array([np.uint64(master_seed), np.uint64(path_index)])
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class NoisePath:
    """Frozen increments of one sample path.

    ``additive`` holds the fields G dW1 actually added per step;
    ``w2`` holds the per-mode scalar increments sqrt(dt)*eta of W2, which
    must be re-weighted by H(sigma) at the current nutrient iterate.
    """

    seed: int
    path_index: int
    dt: float
    additive: np.ndarray   # (n_steps, *grid.shape)
    w2: np.ndarray         # (n_steps, n_modes)

    @property
    def n_steps(self):
        return self.additive.shape[0]


def generate_path(grid: Grid, add_spec: AdditiveNoiseSpec,
                  mult_spec: MultiplicativeNoiseSpec, dt, n_steps,
                  master_seed, path_index) -> NoisePath:
    rng = path_rng(master_seed, path_index)
    add = np.zeros((n_steps,) + grid.shape)
    m2 = mult_spec.n_modes if mult_spec.active else 0
    w2 = np.zeros((n_steps, m2))
    basis = ModeBasis(grid, add_spec.n_modes) if add_spec.active else None
    g = (add_spec.coefficients(basis.eigenvalues)
         if basis is not None else None)
    root_dt = np.sqrt(dt)
    for n in range(n_steps):
        if basis is not None:
            xi = rng.standard_normal(add_spec.n_modes)
            add[n] = basis.synthesize(g * root_dt * xi)
        if m2:
            w2[n] = rng.standard_normal(m2) * root_dt
    return NoisePath(seed=int(master_seed), path_index=int(path_index),
                     dt=float(dt), additive=add, w2=w2)


def zero_path(grid: Grid, dt, n_steps) -> NoisePath:
    return NoisePath(seed=0, path_index=0, dt=float(dt),
                     additive=np.zeros((n_steps,) + grid.shape),
                     w2=np.zeros((n_steps, 0)))


def save_path(directory, grid: Grid, path: NoisePath):
    """Write a path for exact replay: field files plus a scalar CSV."""
    os.makedirs(directory, exist_ok=True)
    for n in range(path.n_steps):
        fieldio.save_field(os.path.join(directory, f"add_{n:06d}.pfb"),
                           ScalarField(grid, path.additive[n]))
    with open(os.path.join(directory, "w2.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mode", "increment"])
        for n in range(path.n_steps):
            for j in range(path.w2.shape[1]):
                writer.writerow([n, j, repr(float(path.w2[n, j]))])
    with open(os.path.join(directory, "path.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "path_index", "dt", "n_steps", "n_modes_w2"])
        writer.writerow([path.seed, path.path_index, repr(path.dt),
                         path.n_steps, path.w2.shape[1]])


def load_path(directory, grid: Grid) -> NoisePath:
    meta_file = os.path.join(directory, "path.csv")
    try:
        with open(meta_file, newline="") as fh:
            rows = list(csv.reader(fh))
        seed, path_index, dt, n_steps, m2 = rows[1]
    except (OSError, IndexError, ValueError) as exc:
        raise ArtifactIOError(f"{meta_file}: unreadable path metadata: {exc}")
    n_steps, m2 = int(n_steps), int(m2)
    add = np.zeros((n_steps,) + grid.shape)
    for n in range(n_steps):
        f = fieldio.load_field(os.path.join(directory, f"add_{n:06d}.pfb"))
        if f.grid != grid:
            raise StepMismatch(f"stored increment {n} is on a different grid")
        add[n] = f.values
    w2 = np.zeros((n_steps, m2))
    with open(os.path.join(directory, "w2.csv"), newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for step, mode, val in reader:
            w2[int(step), int(mode)] = float(val)
    return NoisePath(seed=int(seed), path_index=int(path_index),
                     dt=float(dt), additive=add, w2=w2)
