"""Exception classes shared across the package.

Each class carries the CLI exit code it maps to (2 config, 3 numerical,
4 assertion).
"""


class WarpflowError(Exception):
    exit_code = 3


class InvalidConfig(WarpflowError):
    exit_code = 2


class ParseError(InvalidConfig):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SchemaError(InvalidConfig):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NonPositiveWarping(WarpflowError):
    pass


class DegenerateMetric(WarpflowError):
    pass


class ChartSingularity(WarpflowError):
    pass


class StepTooSmall(WarpflowError):
    pass


class DimensionMismatch(WarpflowError):
    pass


class BlowupDetected(WarpflowError):
    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class InsufficientData(WarpflowError):
    pass


class AxisExpansionFailure(WarpflowError):
    pass


class MissingArtifacts(WarpflowError):
    exit_code = 4
