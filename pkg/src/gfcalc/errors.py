"""Exception types raised by the library."""


class GFCalcError(Exception):
    """Base class for all library errors."""


class LadderError(GFCalcError, ValueError):
    pass


class MollifierError(GFCalcError, ValueError):
    pass


class DimensionMismatch(GFCalcError, ValueError):
    pass


class SmoothnessExceeded(GFCalcError, ValueError):
    pass


class UnboundedIntegrand(GFCalcError, ValueError):
    """Neither factor has finite support and no truncation is available."""


class NeitherCompact(UnboundedIntegrand):
    pass


class ResolutionTooCoarse(GFCalcError, ValueError):
    pass


class StepUnderflow(GFCalcError, FloatingPointError):
    pass


class DivergentFamily(GFCalcError, ArithmeticError):
    """A family failed the finiteness probe (its values grow across levels)."""


class BatteryClassMismatch(GFCalcError, ValueError):
    pass


class SupportViolation(GFCalcError, ValueError):
    pass


class VerificationFailure(GFCalcError, RuntimeError):
    """A catalog fundamental solution did not produce a decreasing residual."""


class ConfigError(GFCalcError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
