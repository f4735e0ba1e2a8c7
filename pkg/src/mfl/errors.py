"""Exception types raised across the package."""


class MflError(Exception):
    """Base class for errors raised by mfl."""


class DomainError(MflError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class ShapeError(MflError, ValueError):
    """Array shapes or dimensions do not match."""


class UnsupportedModelError(MflError, TypeError):
    """The drift family does not support the requested operation."""


class SimulationBlowUpError(MflError, FloatingPointError):
    """A simulated state became non-finite."""

    def __init__(self, step, particle, message=None):
        self.step = int(step)
        self.particle = int(particle)
        super().__init__(
            message or f"non-finite state at step {self.step}, particle {self.particle}"
        )


class NumericError(MflError, FloatingPointError):
    """A likelihood or Fisher accumulation produced a non-finite value."""


class SingularMatrixError(MflError, ArithmeticError):
    """A matrix failed the scale-aware determinant test."""

    def __init__(self, message, det=None, cond=None):
        self.det = det
        self.cond = cond
        super().__init__(f"{message} (det={det!r}, cond={cond!r})")


class PreconditionError(MflError, ValueError):
    """An experiment precondition does not hold."""


class ExperimentError(MflError, RuntimeError):
    """A Monte Carlo experiment could not be completed."""


class ConfigError(MflError, ValueError):
    """An experiment configuration is invalid; carries every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))
