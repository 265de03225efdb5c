class ApproximationValidityError(ValueError):
    """Sample count below the floor where the Gaussian approximation holds."""


class ScheduleError(ValueError):
    """Sensing time does not fit inside the slot."""


class StructuralError(ValueError):
    """A GP term would need a nonpositive coefficient."""


class InfeasibleError(RuntimeError):
    """The GP (or its phase-one problem) has no strictly feasible point."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
