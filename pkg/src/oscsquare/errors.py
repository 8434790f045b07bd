"""Exception types shared across the package."""


class OscSquareError(Exception):
    """Base class for all package errors."""


class NonPositiveJacobian(OscSquareError):
    """The volume Jacobian determinant is not positive (epsilon too large)."""


class NegativeBoundaryWeight(OscSquareError):
    """A boundary Jacobian weight came out negative."""


class InvalidMeshSize(OscSquareError):
    """Mesh resolution outside the supported range."""


class QuadratureBudgetExceeded(OscSquareError):
    """Resolving the coefficient oscillation would need too many points."""


class AssemblyOverflow(OscSquareError):
    """Total quadrature work for an assembly exceeds the configured cap."""


class NotConverged(OscSquareError):
    """An iterative solver did not reach its tolerance.

    Carries the last iterate and the solve report so callers can inspect
    (or deliberately reuse) the best available approximation.
    """

    def __init__(self, message, report=None, x=None, indefinite=False):
        super().__init__(message)
        self.report = report
        self.x = x
        self.indefinite = indefinite


class DegenerateDeflation(OscSquareError):
    """Deflated start vectors collapsed in the M-norm."""


class NewtonDiverged(OscSquareError):
    """Newton residuals grew instead of converging."""


class SingularLinearization(OscSquareError):
    """The linearized operator could not be solved or shifted to definiteness."""


class ContinuationLost(OscSquareError):
    """A branch could not be continued to the next epsilon.

    Carries the legs that did converge so callers can report the partial
    branch instead of discarding it.
    """

    def __init__(self, message, legs=None):
        super().__init__(message)
        self.legs = [] if legs is None else legs


class BlowupDetected(OscSquareError):
    """The evolving state crossed the sup-norm blowup guard."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigInvalid(OscSquareError):
    """A run configuration violates a problem hypothesis; names the violation."""
