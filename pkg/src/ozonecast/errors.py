"""Exception hierarchy shared by every module."""


class OzoneError(Exception):
    """Base class for all library errors."""


class SchemaError(OzoneError):
    pass


class ParseError(OzoneError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateDateError(OzoneError):
    def __init__(self, row: int, date):
        self.row = row
        self.date = date
        super().__init__(f"row {row}: duplicate date {date}")


class GapRunError(OzoneError):
    def __init__(self, column: str, start: int, length: int, max_run: int):
        self.column = column
        self.start = start
        self.length = length
        super().__init__(
            f"column {column!r}: {length} consecutive gaps starting at row {start} "
            f"(limit {max_run})"
        )


class GapBudgetError(OzoneError):
    def __init__(self, column: str, fraction: float, max_fraction: float):
        self.column = column
        self.fraction = fraction
        super().__init__(
            f"column {column!r}: gap fraction {fraction:.4%} exceeds {max_fraction:.4%}"
        )


class SplitError(OzoneError):
    pass


class StatError(OzoneError):
    pass


class FeatureError(OzoneError):
    pass


class FitError(OzoneError):
    pass


class PredictError(OzoneError):
    pass


class DivergenceError(OzoneError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite training loss at epoch {epoch}")


class MetricError(OzoneError):
    pass


class ConvergenceWarning(UserWarning):
    """Iterative solver stopped at its iteration budget."""
