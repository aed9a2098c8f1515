class FdcMacError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FdcMacError, ValueError):
    """An argument lies outside the domain of the function."""


class InfeasibleContentionError(FdcMacError, ValueError):
    """No slot can ever carry a successful reservation (P_succ == 0)."""


class NumericalError(FdcMacError, ArithmeticError):
    """A quadrature or closed-form evaluation failed its accuracy checks.

    ``residual`` carries the error estimate when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CalibrationError(NumericalError):
    """The detection target cannot be bracketed for the given sensing setup."""


class ApproximationUnavailable(NumericalError):
    """The single-Q approximation of the average detection could not be fitted."""


class ConfigError(FdcMacError, ValueError):
    """A manifest or configuration file is malformed.

    ``field`` names the offending ``section.key`` and ``line`` its 1-based
    line number in the source text, when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f"{field}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
