"""Exception types raised across the package."""


class ManakovError(Exception):
    """Base class for all package errors."""


class InvalidParams(ManakovError, ValueError):
    pass


class ZeroMass(ManakovError, ValueError):
    """Raised when a moment is requested of a field with zero L2 norm."""


class IncompatibleResolution(ManakovError, ValueError):
    """Raised when a step count does not divide the finest resolution."""


class SingularSystem(ManakovError, ArithmeticError):
    pass


class NoConvergence(ManakovError, RuntimeError):
    """Fixed-point iteration hit its iteration cap."""

    def __init__(self, iterations, change):
        super().__init__(
            f"fixed-point iteration did not converge after {iterations} "
            f"iterations (last change {change:.3e})"
        )
        self.iterations = iterations
        self.change = change


class Blowup(ManakovError, RuntimeError):
    """H1 norm exceeded the blowup threshold (or became non-finite)."""

    def __init__(self, h1, threshold):
        super().__init__(f"H1 norm {h1:.6g} exceeds threshold {threshold:.6g}")
        self.h1 = h1
        self.threshold = threshold


class DegenerateVariance(ManakovError, ValueError):
    pass


class ValidationError(ManakovError, ValueError):
    """Invalid configuration value; ``key`` names the offending entry."""

    def __init__(self, key, message=None):
        super().__init__(key if message is None else f"{key}: {message}")
        self.key = key


class DivisibilityError(ValidationError):
    pass
