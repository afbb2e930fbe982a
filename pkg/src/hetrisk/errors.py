"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage/config problems, 3 for bad input data, 4 for numerical failures.
"""


class HetRiskError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", *, exit_code: int | None = None):
        super().__init__(message)
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(HetRiskError, ValueError):
    exit_code = 2


# data errors

class DataError(HetRiskError):
    exit_code = 3


class FormatError(DataError):
    pass


class MissingDataError(DataError):
    pass


class DegenerateReturnError(DataError):
    pass


class NestingError(DataError):
    pass


class DomainError(DataError, ValueError):
    pass


class SchedulingError(DataError):
    pass


# numerical errors

class NumericalError(HetRiskError, ArithmeticError):
    exit_code = 4


class CollinearLoadingsError(NumericalError):
    def __init__(self, message: str = "", *, columns=(), level: int | None = None):
        super().__init__(message)
        self.columns = tuple(columns)
        self.level = level


class DegenerateTickerError(NumericalError):
    pass


class DegenerateResidualError(NumericalError):
    def __init__(self, message: str = "", *, level: int | None = None):
        super().__init__(message)
        self.level = level


class SingularSpecificRiskError(NumericalError):
    pass


class SingularFactorCovarianceError(NumericalError):
    pass


class NoSignalError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str = "", *, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual
