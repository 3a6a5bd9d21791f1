"""Exception types shared across the toolkit."""


class SteinAuditError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(SteinAuditError, ValueError):
    pass


class SupportMismatch(SteinAuditError, ValueError):
    """The support inclusion required by an identity or bound does not hold."""


class OffSupport(SteinAuditError, ValueError):
    pass


class NonFiniteEvaluation(SteinAuditError, ArithmeticError):
    """An integrand or objective returned NaN or an infinity."""


class NonConvergence(SteinAuditError, ArithmeticError):
    pass


class NonIntegrable(SteinAuditError, ArithmeticError):
    pass


class NotPowerExponential(SteinAuditError, ValueError):
    pass


class NotCentered(SteinAuditError, ValueError):
    pass


class UnknownClass(SteinAuditError, KeyError):
    pass


class InvalidMixing(SteinAuditError, ValueError):
    pass


class NonFiniteMoments(SteinAuditError, ArithmeticError):
    pass


class NonFiniteDistance(SteinAuditError, ArithmeticError):
    pass


class DecompositionMismatch(SteinAuditError, ArithmeticError):
    """J computed by quadrature disagrees with Gamma + Psi."""


class ConfigError(SteinAuditError, ValueError):
    pass


class MembershipWarning(UserWarning):
    """A test function failed the numerical F(p) membership probe."""
