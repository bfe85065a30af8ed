"""Double-well potential, its regularization, and the proliferation ramp.

Only the quartic well psi(r) = (r^2-1)^2/4 is implemented; its convexity
defect is exactly C2 = 1, so gamma(r) = psi'(r) + r = r^3 is monotone and
the resolvent equation x + lam*x^3 = r has a unique real root for every
lam > 0.  The proliferation function is the piecewise-linear ramp
h(r) = clamp((r+1)/2, 0, 1); its derivative at the kinks r = +-1 is fixed
to 1/2 and that convention is shared by the forward, tangent and adjoint
solvers so the discrete duality identity stays exact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence

# Convexity defect of the quartic well: psi''(r) = 3r^2 - 1 >= -C2.
C2 = 1.0
# Cubic-derivative growth constant: |psi'''(r)| = 6|r| <= C4*(1+|r|).
C4 = 6.0
# Lipschitz constant of the ramp h.
LIPSCHITZ_H = 0.5

NEWTON_TOL = 1e-14
NEWTON_MAX_ITER = 200


def psi(r):
    r = np.asarray(r, dtype=float)
    return 0.25 * (r * r - 1.0) ** 2


def psi_prime(r):
    r = np.asarray(r, dtype=float)
    return r ** 3 - r


def psi_pp(r):
    r = np.asarray(r, dtype=float)
    return 3.0 * r * r - 1.0


def psi_ppp(r):
    r = np.asarray(r, dtype=float)
    return 6.0 * r


def h(r):
    r = np.asarray(r, dtype=float)
    return np.clip(0.5 * (r + 1.0), 0.0, 1.0)


def h_prime(r):
    """A.e. derivative of the ramp; value 1/2 at the kinks r = +-1."""
    r = np.asarray(r, dtype=float)
    return np.where((r >= -1.0) & (r <= 1.0), 0.5, 0.0)


def yosida_resolvent(r, lam):
    """Unique real root x of x + lam*x^3 = r, by safeguarded Newton.

    The root is bracketed by [min(0, r), max(0, r)]; iterates leaving the
    bracket fall back to bisection.  Tolerance 1e-14 on the root.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    lo = np.minimum(0.0, r)
    hi = np.maximum(0.0, r)
    x = r / (1.0 + lam)  # first Newton step from 0 for the linearized cubic
    for _ in range(NEWTON_MAX_ITER):
        f = x + lam * x ** 3 - r
        fp = 1.0 + 3.0 * lam * x * x
        step = f / fp
        x_new = x - step
        bad = (x_new < lo) | (x_new > hi)
        if np.any(bad):
            x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        f_new = x_new + lam * x_new ** 3 - r
        lo = np.where(f_new < 0, x_new, lo)
        hi = np.where(f_new > 0, x_new, hi)
        done = np.abs(x_new - x) <= NEWTON_TOL * (1.0 + np.abs(x_new))
        x = x_new
        if np.all(done):
            return float(x[0]) if scalar else x
    raise NoConvergence("yosida_resolvent: Newton/bisection did not settle")


def yosida_psi_prime(r, lam):
    """Yosida-regularized derivative: gamma_lam(r) - C2*r with gamma = cubes."""
    r = np.asarray(r, dtype=float)
    x = yosida_resolvent(r, lam)
    return (r - x) / lam - C2 * r


def yosida_psi_pp(r, lam):
    """Exact derivative of yosida_psi_prime, used by the tangent solver."""
    r = np.asarray(r, dtype=float)
    x = np.asarray(yosida_resolvent(r, lam))
    gp = 3.0 * x * x
    return gp / (1.0 + lam * gp) - C2


@dataclass(frozen=True)
class PotentialSpec:
    """Recorded assumption constants for the configured potential.

    C1 and C3 appear only in the growth/continuity assumptions and drive
    no computation; they are kept for validation reports.
    """

    kind: str = "quartic"
    C1: float = 4.0
    C2: float = C2
    C3: float = 1.0
    C4: float = C4

    def __post_init__(self):
        if self.kind != "quartic":
            raise ValueError(f"unsupported potential kind {self.kind!r}")
        if min(self.C1, self.C2, self.C3, self.C4) <= 0:
            raise ValueError("assumption constants must be positive")

    def validate(self, sample_range=(-10.0, 10.0), n=20001):
        """Sampled checks of the structural assumptions.

        Returns a dict with the worst margins found; all entries must be
        nonnegative for the configured constants to be consistent.  Also
        reports the minimal C1 for which |psi''| <= C1*(1+|psi'|) holds on
        the sampled range (the quartic satisfies it range-wise only).
        """
        r = np.linspace(sample_range[0], sample_range[1], n)
        lower_bound_margin = float(np.min(psi_pp(r) + self.C2))
        cubic_growth_margin = float(
            np.min(self.C4 * (1.0 + np.abs(r)) - np.abs(psi_ppp(r))))
        c1_minimal = float(np.max(np.abs(psi_pp(r)) /
                                  (1.0 + np.abs(psi_prime(r)))))
        return {
            "second_derivative_lower_bound_margin": lower_bound_margin,
            "cubic_growth_margin": cubic_growth_margin,
            "c1_minimal_on_range": c1_minimal,
            "c1_configured": self.C1,
        }


@dataclass(frozen=True)
class ProliferationSpec:
    """The ramp is fixed-form; only its Lipschitz constant is recorded."""

    lipschitz: float = LIPSCHITZ_H

    def validate(self):
        r = np.linspace(-5.0, 5.0, 4001)
        v = h(r)
        return {
            "monotone": bool(np.all(np.diff(v) >= 0)),
            "range_ok": bool(v.min() >= 0.0 and v.max() <= 1.0),
            "endpoints_ok": bool(h(-1.0) == 0.0 and h(1.0) == 1.0),
        }
