"""Exception hierarchy.

Validation errors describe bad input data (CLI exit code 2); estimation errors
describe a method that cannot produce an estimate on valid data (exit code 3).
"""

from __future__ import annotations


class ObsFuseError(Exception):
    """Base class for all package errors."""


class ValidationError(ObsFuseError):
    pass


class EstimationError(ObsFuseError):
    pass


class MissingColumn(ValidationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"MissingColumn: expected header 'y,x,z,g', column {column!r} missing")


class NonNumericCell(ValidationError):
    def __init__(self, row: int, col: str, value: str):
        self.row = row
        self.col = col
        super().__init__(f"NonNumericCell: row {row}, column {col!r}: {value!r}")


class UnknownGroupTag(ValidationError):
    def __init__(self, row: int, value: str):
        self.row = row
        super().__init__(f"UnknownGroupTag: row {row}: {value!r} (expected E or O)")


class EmptyGroup(ValidationError):
    def __init__(self, group: str):
        self.group = group
        super().__init__(f"EmptyGroup: no rows tagged {group}")


class NonBinaryOutcome(ValidationError):
    def __init__(self, group: str):
        self.group = group
        super().__init__(f"NonBinaryOutcome: y in group {group} must be 0 or 1")


class ConfigError(ValidationError):
    pass


class SingularDesign(EstimationError):
    pass


class WeakFirstStage(EstimationError):
    pass


class DegenerateZ(EstimationError):
    pass


class NonpositiveVariance(EstimationError):
    pass


class SingularWeighting(EstimationError):
    pass


class DegenerateFold(EstimationError):
    def __init__(self, index: int, cause: Exception | None = None):
        self.index = index
        super().__init__(f"DegenerateFold: leaving out experimental unit {index} gives a singular fit")


class NonConvergence(EstimationError):
    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(f"NonConvergence: {message}")


class InfeasibleDesign(EstimationError):
    pass


class MonteCarloFailure(EstimationError):
    pass
