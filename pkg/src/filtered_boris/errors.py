"""Exception hierarchy shared by all modules."""


class BorisError(Exception):
    """Base class for errors raised by this package."""


class SingularMatrix(BorisError, ArithmeticError):
    """A 3x3 system (or an inverse filter action) is numerically singular."""


class FilterPole(BorisError, ArithmeticError):
    """A filter function was evaluated too close to one of its poles."""


class ZeroField(BorisError, ValueError):
    """The magnetic field vanishes where a direction or norm is required."""


class DegenerateField(BorisError, ValueError):
    """A field preset is singular at the query point."""


class NearResonance(BorisError):
    """The step size violates the non-resonance guard under the reject policy."""

    def __init__(self, status):
        super().__init__(
            f"near resonance: |sinc(k h |B| / 2)| = {status.value:.3g} for k = {status.k}"
        )
        self.status = status


class NoConvergence(BorisError):
    """The fixed-point iteration for the field evaluation point diverged."""


class OracleNotConverged(BorisError):
    """The reference solution failed its step-halving self-check."""


class GridMismatch(BorisError, ValueError):
    """Numerical and reference solutions are not sampled on the same grid."""


class InsufficientData(BorisError, ValueError):
    """Too few usable points for a least-squares slope fit."""


class StepError(BorisError):
    """Wraps an error raised inside a trajectory, attaching the step index."""

    def __init__(self, n, cause):
        super().__init__(f"step {n}: {type(cause).__name__}: {cause}")
        self.n = n
        self.cause = cause
