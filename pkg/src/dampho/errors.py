"""Exception types raised by :mod:`dampho`."""


class DampHOError(Exception):
    """Base class for all errors raised by this package."""


class OriginUndefined(DampHOError, ValueError):
    """Quantity has no value at the phase-space origin (x, v) = (0, 0)."""


class AxisUndefined(DampHOError, ValueError):
    """Quantity needs ln(omega^2 x^2) and is undefined on x = 0."""


class DomainError(DampHOError, ValueError):
    """Argument outside the domain of a formula (e.g. ln(cos phi) with cos phi <= 0)."""


class QuadraturePathInvalid(DampHOError, ValueError):
    """Integration path of the velocity quadrature touches xi = 0."""


class NonConvergence(DampHOError, ArithmeticError):
    """Adaptive quadrature or iteration failed to reach its tolerance."""


class NoRootInBracket(DampHOError, ValueError):
    """The supplied velocity bracket has no sign change of the momentum equation."""


class MultipleRootsWarning(UserWarning):
    """The momentum equation is not monotonic inside the bracket."""


class StepFailure(DampHOError, ArithmeticError):
    """Adaptive Runge-Kutta stepping could not meet its tolerance."""


class PoleAt(DampHOError, ValueError):
    """A tangent in an analytic solution is evaluated at its pole."""


class SegmentSpansCrossing(DampHOError, ValueError):
    """Requested trajectory segment contains a v = 0 crossing."""


class SeriesNotConverged(DampHOError, ArithmeticError):
    """The truncated phase-operator series is not converged to the declared tolerance."""


class OutsideTrustedWindow(DampHOError, IndexError):
    """Fock level lies outside the window unaffected by basis truncation."""


class TruncationUnstable(DampHOError, ArithmeticError):
    """Eigenvalues moved by more than the allowed amount when the basis was doubled."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
