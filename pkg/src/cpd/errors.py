"""Exception types shared across the package."""


class AxisSingularityError(ValueError):
    """Electric field evaluated on (or too close to) its singular axis."""


class ImaginaryResidueError(RuntimeError):
    """A spectral coefficient vector is no longer conjugate-symmetric.

    Raised when transforming coefficients of a nominally real field back to
    the grid and the imaginary residue exceeds tolerance; indicates state
    corruption upstream.
    """


class DivergenceError(RuntimeError):
    """Time stepping produced a non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class FixedPointError(RuntimeError):
    """Fixed-point iteration failed to converge (step size too large)."""


class StepBudgetError(RuntimeError):
    """A reference solve would exceed its step budget."""


class UndefinedMetricError(ValueError):
    """Error metric undefined (reference norm vanishes)."""
