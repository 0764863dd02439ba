"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): precondition
violations, which mean the request itself is invalid, and numerical
failures, which mean a valid request could not be evaluated to tolerance.
"""


class IgmFptError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(IgmFptError, ValueError):
    """The arguments violate an operation's preconditions."""


class NumericalError(IgmFptError, ArithmeticError):
    """A numerical routine did not reach its tolerance or budget."""


class ValidationFailure(IgmFptError):
    """One or more analytic-vs-simulation checks failed."""

    def __init__(self, failing):
        self.failing = list(failing)
        super().__init__("failing checks: " + ", ".join(self.failing))


# process construction
class NonMonotoneRho(PreconditionError):
    pass


class ZeroH2(PreconditionError):
    pass


class InconsistentInverse(PreconditionError):
    pass


class BadParameter(PreconditionError):
    pass


class OutOfDomain(PreconditionError):
    pass


class BadOrder(PreconditionError):
    pass


class BoundViolation(PreconditionError):
    pass


class NotDivergent(PreconditionError):
    """The clock of the integrated process has a finite limit."""


class NonconstantMean(PreconditionError):
    """First-passage formulas need m(t) constant."""


class RequiresSimulation(PreconditionError):
    """No closed form exists for this case; use the Monte Carlo oracle."""


class UnsupportedBoundary(RequiresSimulation):
    pass


class UnknownFiniteness(PreconditionError):
    pass


class OutOfInterval(PreconditionError):
    pass


class NotADensity(PreconditionError):
    pass


class OutOfRange(PreconditionError):
    pass


class NonPositiveArgument(PreconditionError):
    pass


# numerics
class QuadratureFailure(NumericalError):
    pass


class NoDecayDetected(NumericalError):
    pass


class NotConverging(NumericalError):
    pass


class DivergentMoment(NumericalError):
    """Finiteness of an exit-time moment could not be established."""


class AllCensored(NumericalError):
    """No simulated path reached the boundary before the horizon."""
