"""Exception hierarchy shared by every module.

Guard violations (search/enumeration limits, infeasible power conditions) map
to CLI exit code 3; configuration problems map to exit code 2.
"""


class StructCodesError(Exception):
    """Base class for all library errors."""


class GuardViolation(StructCodesError):
    """A hard computational or feasibility guard was tripped."""


class DomainError(StructCodesError, ValueError):
    pass


class DimensionError(StructCodesError, ValueError):
    pass


class ZeroInverse(StructCodesError, ZeroDivisionError):
    pass


class SingularMatrix(StructCodesError, ValueError):
    pass


class InvalidPmf(DomainError):
    pass


class SearchTooLarge(GuardViolation):
    pass


class EnumerationTooLarge(GuardViolation):
    pass


class NonPositiveTarget(DomainError):
    pass


class PowerConditionViolated(GuardViolation):
    pass


class LatticeRequired(StructCodesError, ValueError):
    pass


class VarianceMismatch(DomainError):
    pass


class ValidationFailed(StructCodesError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NonFiniteCapacity(DomainError):
    pass


class AcyclicityRequired(StructCodesError, ValueError):
    pass


class AttemptsExhausted(GuardViolation):
    pass


class ConfigError(StructCodesError, ValueError):
    pass


class ParseError(ConfigError):
    pass
