"""Exception types shared across the package.

The CLI maps these onto exit codes (config -> 2, data -> 3, numeric -> 4),
and the HTTP service maps them onto status codes, so raising the right
class matters more than the message text.
"""


class CftrustError(Exception):
    """Base class for all package errors."""


class ConfigError(CftrustError):
    """Invalid configuration: bad value, unknown key, missing file reference."""


class DataError(CftrustError):
    """Input data cannot be used: unreadable file, unmapped schema role,
    zero surviving rows, precondition violations on record sets."""


class NumericDivergenceError(CftrustError):
    """A numeric routine produced non-finite values and cannot continue."""


class SchemaMismatchError(CftrustError):
    """A serialized model does not match the active feature schema."""


class StageFailure(CftrustError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
