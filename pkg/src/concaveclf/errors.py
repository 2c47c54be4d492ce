"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An argument violates a documented precondition."""


class IntegrabilityError(ValueError):
    """The comparison function vanishes (or is negative) inside the window."""


class ClassificationError(RuntimeError):
    """Curvature and factor-monotonicity evidence disagree beyond tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SamplingError(RuntimeError):
    """Sublevel-set sampling failed (acceptance region too small)."""


class TuningError(RuntimeError):
    """A tuning target is unreachable; carries the best value achieved."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class RecipeError(RuntimeError):
    """The tuning recipe exhausted its iteration budget; carries the step trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InfeasibleError(RuntimeError):
    """A hard CLF-QP instance admits no input inside the box."""


class NoCrossingError(RuntimeError):
    """A trajectory never entered the requested sublevel set."""

    def __init__(self, message, final_value=None):
        super().__init__(message)
        self.final_value = final_value


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""
