"""Exception hierarchy shared by all orlat modules."""


class OrlatError(Exception):
    """Base class for all errors raised by orlat."""


class WeightSpecError(OrlatError, ValueError):
    pass


class NonNormalized(WeightSpecError):
    pass


class NegativeSupport(WeightSpecError):
    pass


class AllMassAtZero(WeightSpecError):
    pass


class EmptyLaw(WeightSpecError):
    pass


class QuadratureNonConvergence(OrlatError, ArithmeticError):
    pass


class DimensionMismatch(OrlatError, ValueError):
    pass


class SubcriticalRate(OrlatError, ValueError):
    """The infection rate does not exceed ``1 / E(rho^2)``."""


class NoConvergence(OrlatError, RuntimeError):
    pass


class BadGrid(OrlatError, ValueError):
    pass


class OutOfSupport(OrlatError, ValueError):
    pass


class MixedNormInitialSet(OrlatError, ValueError):
    pass


class DimensionTooSmall(OrlatError, ValueError):
    pass


class NormOrderViolated(OrlatError, ValueError):
    pass


class InconsistentRecord(OrlatError, ValueError):
    pass


class BadArguments(OrlatError, ValueError):
    pass


class ConfigInvalid(OrlatError, ValueError):
    pass


class IoFailure(OrlatError, OSError):
    pass
