"""Exception hierarchy. Each error carries a machine-readable ``code``."""


class ProfilerError(Exception):
    code = "profiler_error"


class ConfigurationError(ProfilerError, ValueError):
    code = "configuration_error"


class MatrixParseError(ProfilerError, ValueError):
    code = "parse_error"


class InsufficientDataError(ProfilerError, ValueError):
    code = "insufficient_data"


class UndefinedMeasureError(ProfilerError, ArithmeticError):
    """A measure has no defined value for this input (e.g. zero variance)."""

    code = "undefined_measure"


class DataError(ProfilerError, ValueError):
    code = "data_error"


class EvaluationError(ProfilerError, ValueError):
    code = "evaluation_error"


class RankDeficientError(ProfilerError, ValueError):
    code = "rank_deficient"

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class InputNotFoundError(ProfilerError, FileNotFoundError):
    code = "input_not_found"
