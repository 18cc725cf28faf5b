"""Exception hierarchy.  Every input problem derives from :class:`InputError`."""


class QamodError(Exception):
    """Base class for all package errors."""


class InputError(QamodError, ValueError):
    """Invalid user input: malformed files, bad parameters, failed preconditions."""


class SceneError(InputError):
    """Scene text does not parse or violates a geometric invariant."""


class ResolutionError(InputError):
    """The grid is too coarse to represent the scene faithfully."""


class CoveringError(InputError):
    """Covering-map specification or preimage tracing failed a precondition."""


class ConvergenceError(QamodError):
    """Iterative solve hit its iteration cap; carries the residual history."""

    def __init__(self, message, residuals=None, iterations=0):
        super().__init__(message)
        self.residuals = list(residuals or [])
        self.iterations = iterations
