"""Exception hierarchy shared by the solver, the ROM pipeline and the CLI."""


class SweromError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(SweromError, ValueError):
    """Invalid user input: bad parameters, dimensions, ranges."""

    exit_code = 2


class NumericalError(SweromError, ArithmeticError):
    """A numerical procedure failed (instability, divergence, no convergence)."""

    exit_code = 3


class StabilityError(NumericalError):
    """CFL condition violated during time stepping."""


class DivergenceError(NumericalError):
    """Non-finite values appeared in a state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IterationError(NumericalError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StoreIOError(SweromError, OSError):
    """Snapshot store could not be read or written."""

    exit_code = 4

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
