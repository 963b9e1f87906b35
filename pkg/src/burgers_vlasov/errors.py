"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class BurgersVlasovError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(BurgersVlasovError, ValueError):
    """Invalid grid, scenario or mismatched fields."""


class InvalidDataError(BurgersVlasovError, ValueError):
    """Initial data violating a sign or finiteness requirement."""


class CFLViolation(BurgersVlasovError):
    """A step was requested with dt above the admissible explicit limit."""

    def __init__(self, dt: float, admissible_dt: float):
        super().__init__(f"dt={dt:.6g} exceeds admissible dt={admissible_dt:.6g}")
        self.dt = dt
        self.admissible_dt = admissible_dt


class AbortedRun(BurgersVlasovError):
    """The time loop stopped early (non-finite field or collapsed time step)."""

    def __init__(self, message: str, *, step: int, time: float, field: str | None = None,
                 diagnostics: dict | None = None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.field = field
        self.diagnostics = diagnostics or {}


class SingularKernelError(BurgersVlasovError, ValueError):
    """The derivative heat kernel was requested at zero elapsed time."""


class PicardNoConvergence(BurgersVlasovError):
    """Successive Picard differences stopped shrinking."""

    def __init__(self, message: str, ratios: list[float]):
        super().__init__(message)
        self.ratios = list(ratios)


class InvalidTestFunction(BurgersVlasovError, ValueError):
    """Test function leaves the admissible support or changes sign."""


class SweepError(BurgersVlasovError):
    """A member run of an epsilon sweep failed."""

    def __init__(self, epsilon: float, cause: Exception):
        super().__init__(f"sweep member epsilon={epsilon:g} failed: {cause}")
        self.epsilon = epsilon
        self.cause = cause


class PreconditionError(ConfigurationError):
    """Caller broke an operation's documented precondition."""
