"""Exception hierarchy shared by every dyonflow module."""


class DyonflowError(Exception):
    """Base class for all library errors."""


class NonPositiveDefinite(DyonflowError, ValueError):
    """Kähler metric failed a Cholesky factorization."""


class SingularH(DyonflowError, ValueError):
    """Real part of the gauge kinetic matrix is not invertible."""


class ComplexBranch(DyonflowError, ValueError):
    """Discriminant 1 - 4 V_BH V is negative; no real effective potential."""


class OutOfDomain(DyonflowError, ValueError):
    pass


class HorizonSingularity(OutOfDomain):
    pass


class NonPositiveLambda(DyonflowError, ValueError):
    pass


class NonPositive(DyonflowError, ValueError):
    pass


class EmptySample(DyonflowError, ValueError):
    pass


class NoContraction(DyonflowError, ArithmeticError):
    pass


class MaxIters(DyonflowError, ArithmeticError):
    pass


class BallEscape(DyonflowError, ArithmeticError):
    pass


class StepUnderflow(DyonflowError, ArithmeticError):
    pass


class IllConditionedFit(DyonflowError, ArithmeticError):
    pass


class NoConvergence(DyonflowError, ArithmeticError):
    pass


class ProfileGap(DyonflowError, ValueError):
    pass


class ConfigError(DyonflowError):
    """Base for configuration problems; carries section/key when known."""

    def __init__(self, message, section=None, key=None):
        where = ".".join(p for p in (section, key) if p)
        super().__init__(f"[{where}] {message}" if where else message)
        self.section = section
        self.key = key


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class IoError(ConfigError):
    pass
