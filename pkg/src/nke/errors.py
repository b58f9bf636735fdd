"""Exception hierarchy shared across the library.

Every library-specific failure derives from :class:`NkeError` so callers can
catch one base class. Most errors also derive from the matching builtin
(ValueError etc.) so generic handling keeps working.
"""


class NkeError(Exception):
    """Base class for all errors raised by this library."""


class DegreeTooLarge(NkeError, ValueError):
    """A polynomial/Hermite degree exceeds what float64 arithmetic supports."""


class EigenFailure(NkeError, RuntimeError):
    """The symmetric tridiagonal eigensolver did not converge."""


class NonFiniteActivation(NkeError, ValueError):
    """An activation returned NaN or infinity at a quadrature/sample point."""


class UnknownActivation(NkeError, ValueError):
    """The requested activation name is not in the catalog/registry."""


class BadParams(NkeError, ValueError):
    """Activation or config parameters are malformed for the requested entry."""


class DomainError(NkeError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ZeroNormInput(NkeError, ValueError):
    """An input point has zero Euclidean norm where a direction is required."""


class NonFiniteKernel(NkeError, ArithmeticError):
    """A kernel recursion produced NaN or infinity."""


class DimensionMismatch(NkeError, ValueError):
    """A vector's length does not match the sketch it is applied to."""


class ShapeMismatch(NkeError, ValueError):
    """Two arrays that must agree in shape do not."""


class ZeroDenominator(NkeError, ZeroDivisionError):
    """A relative error was requested against an all-zero reference."""


class NotSymmetric(NkeError, ValueError):
    """A matrix that must be symmetric is not (beyond tolerance)."""


class SingularSystem(NkeError, RuntimeError):
    """A regularized linear system could not be factorized even with jitter."""


class NotHomogeneous(NkeError, ValueError):
    """The operation requires a homogeneous dual activation (k = ab*kappa(c))."""


class DegreeOverflow(NkeError, ValueError):
    """Polynomial composition exceeded the configured degree budget."""
