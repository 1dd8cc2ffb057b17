"""Exception types. Each carries the CLI exit code it maps to."""


class AlloyError(Exception):
    exit_code = 10


class ConfigurationError(AlloyError, ValueError):
    exit_code = 2


class CapacityError(AlloyError, ValueError):
    exit_code = 2


class ParameterError(AlloyError, ValueError):
    """Invalid density parameters."""

    exit_code = 2


class UnsupportedNormError(AlloyError, ValueError):
    exit_code = 2


class HypothesisViolation(AlloyError, ValueError):
    """A standing assumption of a bound does not hold for the given input."""

    exit_code = 3

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        super().__init__(f"hypothesis violated: {assumption}" + (f" ({detail})" if detail else ""))


class NonInvertibleSymbolError(HypothesisViolation):
    def __init__(self, min_abs: float):
        self.min_abs = min_abs
        super().__init__("symbol of u must not vanish", f"min |u_hat| = {min_abs:.3e}")


class ShiftCollisionError(AlloyError, ArithmeticError):
    """A pivot of the shifted LDL^T factorization is numerically zero."""

    exit_code = 4


class NumericalDegeneracyError(AlloyError, ArithmeticError):
    exit_code = 4


class UnsupportedDimensionError(AlloyError, NotImplementedError):
    exit_code = 2
