"""Exception hierarchy shared across the package.

Two branches matter for the CLI: DataError (bad inputs, files, config) maps to
exit code 2, NumericError (non-finite values, degenerate vectors) to exit code 3.
"""


class PfxdiffError(Exception):
    """Base class for every error this package raises on purpose."""


class DataError(PfxdiffError):
    pass


class NumericError(PfxdiffError):
    pass


class BadConfig(DataError):
    pass


class BadSchedule(DataError):
    pass


class BadTimestep(DataError):
    pass


class BadToken(DataError):
    pass


class EmptyInput(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DimMismatch(DataError):
    pass


class BadMagic(DataError):
    pass


class BadVersion(DataError):
    pass


class TruncatedFile(DataError):
    """Raised when a binary file ends mid-record; message carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NoNGrams(DataError):
    pass


class NoValidCandidate(DataError):
    pass


class NonFinite(NumericError):
    pass


class ZeroVector(NumericError):
    pass
