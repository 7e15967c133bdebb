"""Exception hierarchy shared by every layer of the package.

The CLI maps ``InputError`` subclasses to exit code 2 and ``NumericError``
subclasses to exit code 3.
"""


class Finsler2DError(Exception):
    """Base class for all package errors."""


class InputError(Finsler2DError):
    """Bad user input: syntax, unknown names, points outside the domain."""


class NumericError(Finsler2DError):
    """A computation could not be carried out or produced inconsistent data."""


class DomainError(InputError, ArithmeticError):
    """A function was applied outside its real domain.

    ``subexpr`` carries the printed offending sub-expression when the error
    originates in a parsed expression.
    """

    def __init__(self, message, subexpr=None):
        super().__init__(message)
        self.subexpr = subexpr


class DegreeExhausted(NumericError):
    """A derivative was requested from a jet with no remaining order."""


class DegreeMismatch(NumericError):
    """Two jets expanded about different base points were combined."""


class OutsideCone(DomainError):
    pass


class DegenerateMetric(NumericError):
    pass


class SignatureFlip(DomainError):
    """The metric signature changed between sample points."""


class SprayMismatch(NumericError):
    pass


class ProbeDegenerate(NumericError):
    pass


class ProbeDisagreement(NumericError):
    pass


class Inadmissible(DomainError):
    """The conformal factor violates the admissibility condition at a point."""


class NegativeRho(DomainError):
    """``eps * rho <= 0`` where its square root is required."""


class FormulaMismatch(NumericError):
    """Two independent formulas for the same object disagree."""


class PreconditionNotMet(Finsler2DError):
    pass


class NotBerwald(PreconditionNotMet):
    pass


class SamplingError(InputError):
    pass
