"""Exception hierarchy shared across the package."""


class LiteralEError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ParseError(LiteralEError):
    exit_code = 6

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class IngestionError(LiteralEError):
    exit_code = 6


class ConfigurationError(LiteralEError, ValueError):
    exit_code = 4


class DimensionError(LiteralEError, ValueError):
    exit_code = 5

    def __init__(self, op, message):
        super().__init__(f"{op}: {message}")
        self.op = op


class KGLookupError(LiteralEError, KeyError):
    exit_code = 7

    def __str__(self):
        return str(self.args[0]) if self.args else ""
