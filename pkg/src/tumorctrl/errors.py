"""Exception hierarchy shared by all solver and CLI layers.

Exit-code mapping used by the CLI: ConfigInvalid -> 2, SolverError and
subclasses -> 3, ArtifactIOError -> 4.
"""


class TumorCtrlError(Exception):
    """Base class for all package-specific errors."""


class GridMismatch(TumorCtrlError):
    """Fields living on different grids were combined."""


class NonZeroMean(TumorCtrlError):
    """A zero-mean field was required but the input mean exceeds tolerance."""


class SolverError(TumorCtrlError):
    """Base class for numerical failures (CLI exit code 3)."""


class NoConvergence(SolverError):
    """An iterative solver stalled or exhausted its iteration budget."""


class LinearSolveFailure(SolverError):
    """A per-step linear solve did not reach its tolerance."""


class PicardNoConvergence(SolverError):
    """The per-step coupling iteration exhausted picard_max above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonFiniteState(SolverError):
    """A state field left the representable range (inf/nan)."""


class BaseTrajectoryMismatch(SolverError):
    """A tangent/adjoint sweep got a trajectory it cannot consume."""


class StepMismatch(TumorCtrlError):
    """Time-indexed inputs disagree on the number of steps."""


class EmptyEnsemble(TumorCtrlError):
    """An ensemble reduction was requested with no sample paths."""


class LineSearchFailure(SolverError):
    """Armijo backtracking shrank the step below the underflow floor."""


class ConfigInvalid(TumorCtrlError):
    """A configuration violates one of the model assumptions (exit code 2).

    ``assumption`` names the violated requirement, e.g. "A1" or "A7".
    """

    def __init__(self, assumption, message):
        super().__init__(f"[{assumption}] {message}")
        self.assumption = assumption


class ArtifactIOError(TumorCtrlError):
    """Reading or writing a run artifact failed (CLI exit code 4)."""
