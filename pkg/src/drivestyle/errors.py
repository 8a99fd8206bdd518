"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: config/usage errors exit 1, data validation
errors exit 2, numeric degeneracies exit 3.
"""


class DriveStyleError(Exception):
    exit_code = 1


class ConfigError(DriveStyleError):
    exit_code = 1


class DataError(DriveStyleError):
    exit_code = 2


class NumericError(DriveStyleError):
    exit_code = 3


# ingest
class MissingColumn(DataError):
    pass


class MissingMeta(DataError):
    pass


class NonMonotonicFrames(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class FrameCountMismatch(DataError):
    pass


class UnknownRoadUserClass(DataError):
    pass


# features
class EmptySample(NumericError):
    pass


class EmptyMatrix(NumericError):
    pass


# cluster
class TooFewRows(NumericError):
    pass


class KExceedsDistinctRows(NumericError):
    pass


class BadClusterId(ConfigError):
    pass


# label
class UnsupportedK(ConfigError):
    pass


class IncompleteMap(ConfigError):
    pass


# interact
class UnknownTrackId(DataError):
    pass


# report
class IoFailure(DriveStyleError):
    exit_code = 1


class StageFailure(DriveStyleError):
    """Wraps an error with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, DriveStyleError):
            self.exit_code = cause.exit_code
        else:
            self.exit_code = 2
