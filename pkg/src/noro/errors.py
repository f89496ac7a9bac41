"""Exception types raised across the package."""


class NoroError(Exception):
    """Base class for all errors raised by noro."""


class ParseError(NoroError, ValueError):
    """Malformed dataset input. Carries the offending row/column when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class ShapeError(NoroError, ValueError):
    """Array dimensions do not match what an operation expects."""


class ConfigError(NoroError, ValueError):
    """Invalid hyperparameters or experiment configuration."""


class DivergenceError(NoroError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
