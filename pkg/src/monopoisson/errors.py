"""Exception hierarchy shared by every module."""


class MonoPoissonError(Exception):
    """Base class for library errors."""


class InvalidArgument(MonoPoissonError, ValueError):
    pass


class NoUniqueStationary(MonoPoissonError):
    pass


class SolverFailure(MonoPoissonError):
    pass


class SeriesDiverged(SolverFailure):
    pass


class SeriesBudgetExceeded(SolverFailure):
    pass


class CertificationFailed(MonoPoissonError):
    """A certified property (monotonicity, Lipschitz bound, ...) does not hold."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class UnstableModel(MonoPoissonError):
    pass


class NotContractive(MonoPoissonError):
    pass


class MinorizationUnsupported(MonoPoissonError):
    """phi charges a point where P_x(X_1 in .) has no mass."""


class MinorizationViolated(MonoPoissonError):
    pass


class CycleOverflow(MonoPoissonError):
    pass


class CouplingInvariantError(AssertionError):
    """Coupled paths lost their order; always an implementation bug."""


class ConfigError(MonoPoissonError):
    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
