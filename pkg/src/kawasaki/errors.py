"""Exception hierarchy shared by all subsystems.

Exit-code mapping used by the command line tool: ConfigError -> 1,
NumericError -> 2, BudgetError -> 3.
"""


class KawasakiError(Exception):
    """Base class for all package errors."""


class ConfigError(KawasakiError):
    """Invalid configuration, schema violation, or bad input value."""


class InvalidSpecError(ConfigError):
    """Kernel/potential specification with non-positive or missing parameters."""


class GeometryError(ConfigError):
    """Torus too small for the interaction radii (minimal-image ambiguity)."""


class BudgetError(KawasakiError):
    """Planned run exceeds the configured particle/memory budget."""


class NumericError(KawasakiError):
    """Numerical failure: quadrature non-convergence, instability, etc."""


class StepSizeError(NumericError):
    """Time step produced negativity beyond round-off; a smaller dt is needed."""


class HorizonError(NumericError):
    """Requested window violates an analytic certificate (e.g. q(T) >= 1)."""


class NoDynamicsError(NumericError):
    """Jump dynamics requested on an empty configuration."""


class BoundViolation(NumericError):
    """A monitored a-priori bound failed along a solver trajectory."""

    def __init__(self, message, time=None, margin=None):
        super().__init__(message)
        self.time = time
        self.margin = margin
