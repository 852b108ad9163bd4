"""Exception and warning types raised across the pipeline.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented status codes (2 = data error, 3 = numeric failure).
"""

from __future__ import annotations


class CellEfaError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2
    module = "cellefa"


class DataError(CellEfaError):
    exit_code = 2


class NumericError(CellEfaError):
    exit_code = 3


# ingest
class MissingColumn(DataError):
    module = "ingest"


class MalformedRow(DataError):
    module = "ingest"


class EmptyFile(DataError):
    module = "ingest"


class DuplicateSiteId(DataError):
    module = "ingest"


class InvalidLocation(DataError):
    module = "ingest"


class UnknownDistrict(DataError, KeyError):
    module = "ingest"

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class EmptyDataset(DataError):
    module = "ingest"


# condense
class OutOfRange(DataError, ValueError):
    module = "condense"


class NoEligibleCells(DataError):
    module = "condense"


# efa
class ZeroVarianceVariable(DataError):
    module = "efa"

    def __init__(self, indices):
        self.indices = [int(i) for i in indices]
        super().__init__(f"zero-variance variables at slot indices {self.indices}")


class ConvergenceFailure(NumericError):
    module = "efa"


# scoring
class IndexOutOfRange(DataError, IndexError):
    module = "scoring"


# synth
class InvalidProfile(DataError, ValueError):
    module = "synth"


# geo-export
class MissingCoordinates(DataError):
    module = "geo_export"

    def __init__(self, cells):
        self.cells = list(cells)
        shown = ", ".join(map(str, self.cells[:10]))
        more = "" if len(self.cells) <= 10 else f" (+{len(self.cells) - 10} more)"
        super().__init__(f"missing or invalid coordinates for cells: {shown}{more}")


class NumericalWarning(UserWarning):
    """A numeric condition was handled by a documented fallback."""


class NotPositiveDefiniteWarning(NumericalWarning):
    pass


class NoConvergenceWarning(NumericalWarning):
    pass


class HeywoodWarning(NumericalWarning):
    pass


class SingularTransformWarning(NumericalWarning):
    pass


class SingularCorrelationWarning(NumericalWarning):
    pass
