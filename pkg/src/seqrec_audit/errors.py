"""Exception hierarchy; the CLI maps each class to an exit code."""


class AuditError(Exception):
    """Base class for every error raised deliberately by this package."""

    exit_code = 3


class ConfigError(AuditError, ValueError):
    """Invalid configuration or usage."""

    exit_code = 1


class DataError(AuditError):
    """Input data is missing, malformed, or inconsistent."""

    exit_code = 2


class ParseError(DataError):
    """A specific line or byte range of an input file could not be parsed."""

    def __init__(self, path, message, line=None, offset=None):
        where = str(path)
        if line is not None:
            where += f":{line}"
        if offset is not None:
            where += f" @byte {offset}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.offset = offset


class TrainingDivergedError(DataError):
    """BPR training produced a non-finite loss."""
