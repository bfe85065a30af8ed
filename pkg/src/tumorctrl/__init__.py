"""Stochastic Cahn-Hilliard tumor growth: simulation and control.

A Neumann-box discretization of the coupled phase/nutrient system with
additive and multiplicative Q-Wiener noise, the treatment cost
functional, and adjoint-based projected gradient descent over
box-constrained controls, built so the discrete tangent/adjoint pair is
an exact transpose.
"""

from .adjoint import AdjointResult, AdjointState, duality_check, \
    solve_adjoint
from .controls import ControlPair, constant_controls
from .errors import (ArtifactIOError, BaseTrajectoryMismatch, ConfigInvalid,
                     EmptyEnsemble, GridMismatch, LineSearchFailure,
                     LinearSolveFailure, NoConvergence, NonFiniteState,
                     NonZeroMean, PicardNoConvergence, SolverError,
                     StepMismatch, TumorCtrlError)
from .fieldio import field_to_csv, load_field, save_field
from .forward import (ModelParams, SolverConfig, StateSnapshot, Stepper,
                      Trajectory, simulate, yosida_convergence_study)
from .functionals import CostSpec, cost_ensemble, cost_path, free_energy
from .grid import (Grid, ScalarField, as_field, grad_norm_sq, inner,
                   laplacian, mean, neumann_inverse, vstar_norm)
from .noise import (AdditiveNoiseSpec, ModeBasis, MultiplicativeNoiseSpec,
                    NoisePath, apply_multiplicative_increment, generate_path,
                    path_rng, sample_additive_increment, zero_path)
from .optimize import (ArmijoOptions, ControlProblem, OptimOptions,
                       OptimReport, kkt_residual, project_box,
                       projected_gradient_descent)
from .potential import (PotentialSpec, ProliferationSpec, h, h_prime, psi,
                        psi_pp, psi_ppp, psi_prime, yosida_psi_pp,
                        yosida_psi_prime)
from .sensitivity import (TangentResult, gateaux_check, observed_orders,
                          solve_tangent, tangent_step)

__version__ = "0.1.0"
