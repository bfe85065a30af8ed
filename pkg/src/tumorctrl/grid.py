"""Cell-centered box grids with homogeneous Neumann boundary operators.

The discrete Laplacian uses the second-order centered stencil with
ghost-cell reflection, which keeps the operator symmetric with respect to
the volume-weighted inner product.  That symmetry is what makes the
summation-by-parts, energy and transpose identities used elsewhere hold
to rounding rather than to discretization error.  The same stencil is
diagonalized exactly by the type-II discrete cosine transform, which is
used both for noise synthesis and for the constant-coefficient fourth
order solves in the time stepper.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy import fft as _fft

from .errors import GridMismatch, NonZeroMean, NoConvergence

# Relative tolerance of the zero-mean precondition for the inverse-Neumann
# operator, scaled by the H-norm of the input.
MEAN_TOL = 1e-9

# Default relative residual for the inverse-Neumann conjugate-gradient solve.
NEUMANN_CG_RTOL = 1e-10


class Grid:
    """Uniform cell-centered grid on a box with reflecting boundaries.

    Parameters
    ----------
    shape : sequence of int
        Cells per axis; every extent must be at least 4.  One to three
        axes are supported; three is accepted but flagged as costly.
    lengths : sequence of float
        Physical side lengths (dimensionless units).
    """

    def __init__(self, shape, lengths):
        shape = tuple(int(n) for n in np.atleast_1d(np.asarray(shape)))
        lengths = tuple(float(x) for x in np.atleast_1d(np.asarray(lengths)))
        if len(shape) != len(lengths):
            raise ValueError("shape and lengths must have the same rank")
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"dim must be 1, 2 or 3, got {len(shape)}")
        if len(shape) == 3:
            warnings.warn("3D grids are supported but costly at desk scale",
                          stacklevel=2)
        if any(n < 4 for n in shape):
            raise ValueError(f"all extents must be >= 4, got {shape}")
        if any(x <= 0 for x in lengths):
            raise ValueError(f"all lengths must be > 0, got {lengths}")
        self.shape = shape
        self.lengths = lengths
        self.spacings = tuple(L / n for L, n in zip(lengths, shape))
        self.cell_volume = float(np.prod(self.spacings))
        self.volume = float(np.prod(lengths))
        self.size = int(np.prod(shape))
        self._eigs = None

    @property
    def dim(self):
        return len(self.shape)

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.shape == other.shape
                and self.lengths == other.lengths)

    def __hash__(self):
        return hash((self.shape, self.lengths))

    def __repr__(self):
        return f"Grid(shape={self.shape}, lengths={self.lengths})"

    def axis_centers(self, axis):
        """Cell-center coordinates along one axis."""
        n = self.shape[axis]
        dx = self.spacings[axis]
        return (np.arange(n) + 0.5) * dx

    def meshgrid(self):
        """Cell-center coordinate arrays of the grid shape."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    # -- basic reductions ------------------------------------------------

    def check_values(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise GridMismatch(f"array shape {a.shape} != grid {self.shape}")
        return a

    def mean(self, a):
        """Volume-weighted average (1/|D|) \\int a."""
        return float(self.check_values(a).mean())

    def integral(self, a):
        """Cell-sum quadrature \\int a."""
        return float(self.check_values(a).sum()) * self.cell_volume

    def inner(self, a, b):
        """Volume-weighted L^2 inner product."""
        a = self.check_values(a)
        b = self.check_values(b)
        return float(np.vdot(a, b)) * self.cell_volume

    def norm(self, a):
        """Discrete H = L^2 norm."""
        return float(np.sqrt(self.inner(a, a)))

    # -- differential operators ------------------------------------------

    def lap(self, a):
        """Neumann Laplacian: centered stencil with ghost-cell reflection."""
        a = self.check_values(a)
        out = np.zeros_like(a)
        for ax in range(self.dim):
            dx2 = self.spacings[ax] ** 2
            p = np.pad(a, [(1, 1) if k == ax else (0, 0)
                           for k in range(self.dim)], mode="edge")
            lo = tuple(slice(0, -2) if k == ax else slice(None)
                       for k in range(self.dim))
            mid = tuple(slice(1, -1) if k == ax else slice(None)
                        for k in range(self.dim))
            hi = tuple(slice(2, None) if k == ax else slice(None)
                       for k in range(self.dim))
            out += (p[lo] - 2.0 * p[mid] + p[hi]) / dx2
        return out

    def grad_norm_sq(self, a):
        """\\int |grad a|^2 by one-sided face differences.

        The face-difference quadrature is the exact summation-by-parts
        partner of :meth:`lap`: inner(-lap(a), a) == grad_norm_sq(a).
        """
        a = self.check_values(a)
        total = 0.0
        for ax in range(self.dim):
            d = np.diff(a, axis=ax) / self.spacings[ax]
            total += float(np.vdot(d, d))
        return total * self.cell_volume

    # -- cosine diagonalization -------------------------------------------

    def dct(self, a):
        """Orthonormal DCT-II coefficients of a (eigenbasis of the stencil)."""
        return _fft.dctn(self.check_values(a), type=2, norm="ortho")

    def idct(self, c):
        """Inverse of :meth:`dct`."""
        return _fft.idctn(np.asarray(c, dtype=float), type=2, norm="ortho")

    def axis_eigenvalues(self, axis):
        """Eigenvalues of the 1D -Laplacian stencil along one axis."""
        n = self.shape[axis]
        dx = self.spacings[axis]
        j = np.arange(n)
        return (2.0 / dx ** 2) * (1.0 - np.cos(np.pi * j / n))

    def neumann_eigenvalues(self):
        """Eigenvalues of -lap on the full grid (DCT-II ordering)."""
        if self._eigs is None:
            eig = np.zeros(self.shape)
            for ax in range(self.dim):
                lam = self.axis_eigenvalues(ax)
                sh = [1] * self.dim
                sh[ax] = self.shape[ax]
                eig = eig + lam.reshape(sh)
            eig.setflags(write=False)
            self._eigs = eig
        return self._eigs

    # -- inverse-Neumann operator and V* norm ------------------------------

    def neumann_inverse(self, y, rtol=NEUMANN_CG_RTOL):
        """Solve -lap(z) = y with mean(z) = 0 for zero-mean y.

        Conjugate gradient on the zero-mean subspace; the iterates are
        re-projected every iteration so rounding cannot leak a constant
        component into the SPD solve.
        """
        y = self.check_values(y)
        ynorm = self.norm(y)
        if abs(self.mean(y)) > MEAN_TOL * max(ynorm, 1e-300):
            raise NonZeroMean(
                f"neumann_inverse requires mean-free input, got mean "
                f"{self.mean(y):.3e} vs H-norm {ynorm:.3e}")
        if ynorm == 0.0:
            return np.zeros(self.shape)
        b = y - y.mean()

        def op(v):
            w = -self.lap(v)
            return w - w.mean()

        z = cg_solve(op, b, np.zeros(self.shape),
                     rtol=rtol, atol=0.0, max_iter=20 * self.size + 100,
                     norm=self.norm, project=lambda v: v - v.mean())
        return z - z.mean()

    def vstar_norm(self, y, rtol=NEUMANN_CG_RTOL):
        """Dual norm sqrt(|grad N(y - mean y)|^2 + |mean y|^2)."""
        y = self.check_values(y)
        m = self.mean(y)
        z = self.neumann_inverse(y - m, rtol=rtol)
        return float(np.sqrt(self.grad_norm_sq(z) + m * m))


def cg_solve(op, b, x0, rtol, atol, max_iter, norm, project=None):
    """Deterministic matrix-free conjugate gradient.

    Raises NoConvergence if the residual stalls for several iterations or
    the iteration budget runs out before reaching max(rtol*|b|, atol).
    """
    x = x0.copy()
    if project is not None:
        x = project(x)
    r = b - op(x)
    if project is not None:
        r = project(r)
    bnorm = norm(b)
    tol = max(rtol * bnorm, atol)
    rr = np.vdot(r, r)
    if norm(r) <= tol:
        return x
    p = r.copy()
    stalled = 0
    best = np.inf
    for _ in range(max_iter):
        ap = op(p)
        denom = np.vdot(p, ap)
        if denom <= 0.0:
            raise NoConvergence(
                f"CG found a non-positive curvature direction "
                f"({denom:.3e}); operator not SPD on this subspace")
        alpha = rr / denom
        x = x + alpha * p
        r = r - alpha * ap
        if project is not None:
            r = project(r)
        rr_new = np.vdot(r, r)
        res = norm(r)
        if res <= tol or rr_new == 0.0:
            return x
        # residual norms oscillate along CG iterations; only a long
        # stretch without a new best counts as a stall
        if res < best * (1.0 - 1e-12):
            best = res
            stalled = 0
        else:
            stalled += 1
            if stalled > 500:
                raise NoConvergence(
                    f"CG stalled at residual {res:.3e} (target {tol:.3e})")
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergence(
        f"CG exhausted {max_iter} iterations at residual {norm(r):.3e} "
        f"(target {tol:.3e})")


@dataclass(frozen=True)
class ScalarField:
    """Real-valued function on a grid; the common currency for all fields."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatch(
                f"field shape {v.shape} != grid {self.grid.shape}")
        if not np.isfinite(v).all():
            raise ValueError("field values must all be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values):
        return ScalarField(self.grid, values)


def as_field(grid, values):
    return ScalarField(grid, np.broadcast_to(np.asarray(values, dtype=float),
                                             grid.shape))


def _pair(f, g):
    if f.grid != g.grid:
        raise GridMismatch("fields live on different grids")
    return f.grid


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.lap(f.values))


def mean(f: ScalarField) -> float:
    return f.grid.mean(f.values)


def inner(f: ScalarField, g: ScalarField) -> float:
    return _pair(f, g).inner(f.values, g.values)


def grad_norm_sq(f: ScalarField) -> float:
    return f.grid.grad_norm_sq(f.values)


def neumann_inverse(f: ScalarField, rtol=NEUMANN_CG_RTOL) -> ScalarField:
    return ScalarField(f.grid, f.grid.neumann_inverse(f.values, rtol=rtol))


def vstar_norm(f: ScalarField) -> float:
    return f.grid.vstar_norm(f.values)
