"""Exception types raised across barrierkit."""


class BarrierKitError(Exception):
    """Base class for all library errors."""


# expression language
class ExpressionError(BarrierKitError, ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, position=None, token=None):
        self.position = position
        self.token = token
        where = "" if position is None else f" at position {position}"
        near = "" if token is None else f" near {token!r}"
        super().__init__(f"{message}{where}{near}")


class IndexOutOfRange(ExpressionError):
    pass


class UnknownFunction(ExpressionError):
    pass


class UnboundParameter(ExpressionError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"parameter {name!r} is not bound")


class NonDifferentiable(ExpressionError):
    pass


# models and certificates
class DimensionMismatch(BarrierKitError, ValueError):
    pass


class UnknownModel(BarrierKitError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown model"


class DegreeNotFound(BarrierKitError):
    pass


class InsufficientGains(BarrierKitError, ValueError):
    pass


class InvalidRectangle(BarrierKitError, ValueError):
    pass


class NonUnitRelativeDegree(BarrierKitError):
    pass


# qp
class IllConditioned(BarrierKitError, ArithmeticError):
    pass


class InfeasibleQP(BarrierKitError):
    """Raised by the safety filter when the hard-error policy is active."""


# sim
class CholeskyFailure(BarrierKitError, ArithmeticError):
    pass


class SingularInnovation(BarrierKitError, ArithmeticError):
    pass


class NonFiniteState(BarrierKitError, ArithmeticError):
    pass


class StepError(BarrierKitError):
    """Wraps a component failure with the simulation step it occurred at."""

    def __init__(self, step, t, cause):
        self.step = step
        self.t = t
        self.cause = cause
        self.trace = None
        super().__init__(f"step {step} (t={t:.6g}): {type(cause).__name__}: {cause}")


class ConfigError(BarrierKitError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
