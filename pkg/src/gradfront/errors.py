"""Exception hierarchy.

Two families matter to callers: :class:`SchemaError` (bad configuration,
CLI exit code 2) and :class:`NumericalError` (anything that went wrong while
computing, CLI exit code 3).
"""


class GradfrontError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(GradfrontError):
    """A computation could not produce a trustworthy result."""


class WindowTooNarrow(NumericalError):
    """The sampled field is not negligible at the edge of the trait window."""


class LevelOutOfRange(NumericalError, ValueError):
    """A level is outside the open interval (0, plateau)."""


class Unsupported(GradfrontError, ValueError):
    """The operation is not defined for this kind of object."""


class GridMismatch(GradfrontError, ValueError):
    """The grid does not resolve a feature of the data."""


class ConvergenceFailure(NumericalError):
    """An iterative eigensolver did not converge."""


class NonPositiveEigenfunction(NumericalError):
    """A principal eigenvector changed sign (indicates a solver bug)."""


class NoConvergence(NumericalError):
    """The domain-doubling limit did not settle before the radius cap."""


class NotInvading(NumericalError, ValueError):
    """A spreading speed was requested for a non-negative eigenvalue."""


class NotApplicable(GradfrontError, ValueError):
    """A diagnostic was requested for an object it does not apply to."""


class Blowup(NumericalError):
    """The solution grew past the instability threshold."""


class PreconditionFailed(NumericalError):
    """Input data violates the hypothesis a check relies on."""


class InsufficientData(NumericalError):
    """Not enough usable samples for a fit."""


class SchemaError(GradfrontError):
    """A scenario document failed validation.

    ``errors`` holds ``(line_number, message)`` pairs; line 0 is used for
    problems that are not tied to a single line.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        text = "; ".join(
            f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors
        )
        super().__init__(text or "invalid scenario")
