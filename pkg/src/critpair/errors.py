"""Exception hierarchy shared by all modules."""


class CritPairError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(CritPairError):
    """A computation failed for numerical reasons (CLI exit code 3)."""


class ConfigError(CritPairError, ValueError):
    """Invalid user configuration or violated precondition (CLI exit code 2)."""


class InvalidReferenceSectionError(ConfigError):
    pass


class NoRootsError(ConfigError):
    pass


class ConvergenceError(NumericalError):
    """Root finding failed after Aberth and the companion fallback.

    ``best`` carries the best iterate found (a ``RootSet`` with residuals).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class WeightInadmissibleError(ConfigError):
    def __init__(self, j, message=None):
        super().__init__(message or f"radial moment m_{j} diverges")
        self.j = j


class PotentialSingularityError(NumericalError):
    pass


class DegenerateDiagonalError(NumericalError):
    pass


class KernelDegeneracyError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class ContourCollisionError(NumericalError):
    pass


class PoleEvaluationError(NumericalError):
    pass


class ZeroCollisionError(NumericalError):
    pass


class SingularRadiusError(NumericalError):
    pass


class DomainError(ConfigError):
    pass


class PreconditionError(ConfigError):
    pass
