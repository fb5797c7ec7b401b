"""Exception hierarchy shared by all engines.

Each class carries an ``exit_code`` used by the command-line front end.
"""


class BussgangError(Exception):
    exit_code = 1


class ValidationError(BussgangError, ValueError):
    exit_code = 6


class InvalidVariance(ValidationError):
    pass


class InvalidPower(ValidationError):
    pass


class InvalidCorrelation(ValidationError):
    pass


class InvalidNoisePower(ValidationError):
    pass


class DomainMismatch(ValidationError):
    pass


class LinalgError(BussgangError, ArithmeticError):
    exit_code = 7


class NotHermitian(LinalgError):
    pass


class NotPSD(LinalgError):
    pass


class NoConvergence(LinalgError):
    pass


class JointCovarianceNotPSD(LinalgError):
    pass


class CapabilityError(BussgangError):
    pass


class NoDerivative(CapabilityError):
    exit_code = 4


class NoClosedForm(CapabilityError):
    exit_code = 3


class ConditionalMeanNotSatisfied(CapabilityError):
    exit_code = 9


class ParseError(BussgangError, ValueError):
    exit_code = 2


class ConfigError(BussgangError, ValueError):
    exit_code = 5


class IoError(BussgangError, OSError):
    exit_code = 8


class DegenerateDiagonal(UserWarning):
    """Warning: a distortion variance is numerically zero, so its correlation
    coefficients are undefined and skipped."""
