class KronTraceBaseException(Exception):
    pass


class SysExitRecommendedError(KronTraceBaseException):
    pass


class InternalError(KronTraceBaseException):
    pass


class DimensionError(KronTraceBaseException, ValueError):
    pass


class SubsystemError(KronTraceBaseException, ValueError):
    pass


class BudgetExceededError(KronTraceBaseException):
    pass


class DegenerateQueryError(KronTraceBaseException):
    pass


class MatrixFormatError(KronTraceBaseException):
    pass


class InvalidConfigError(SysExitRecommendedError):
    pass
