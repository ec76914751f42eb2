"""Exception hierarchy shared by the library and the CLI.

The CLI maps each family to a distinct exit code (see ``EXIT_CODES``).
"""


class MaeegError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(MaeegError, ValueError):
    """Invalid or infeasible configuration."""

    exit_code = 2


class DataError(MaeegError, ValueError):
    """Bad input data: labels, channel counts, empty datasets."""

    exit_code = 3


class InputTooShortError(DataError):
    def __init__(self, length, minimum):
        super().__init__(f"input has {length} samples, need at least {minimum}")
        self.length = length
        self.minimum = minimum


class ParseError(DataError):
    """A file could not be decoded."""


class BadMagicError(ParseError):
    pass


class VersionMismatchError(ParseError):
    pass


class TruncatedFileError(ParseError):
    pass


class DimensionError(MaeegError, ValueError):
    """Operand shapes are incompatible."""

    exit_code = 4


class ContractError(MaeegError, RuntimeError):
    """A documented precondition of an operation was violated."""

    exit_code = 4


class DegenerateMaskError(ContractError):
    """Too few masked positions for the contrastive objective."""


EXIT_CODES = {
    "ok": 0,
    "unexpected": 1,
    "config": ConfigError.exit_code,
    "data": DataError.exit_code,
    "runtime": ContractError.exit_code,
}
