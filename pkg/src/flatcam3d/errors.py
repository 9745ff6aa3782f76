"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A domain precondition or type invariant was violated."""


class FormatError(ValueError):
    """An on-disk artifact has a bad magic, header, version, or payload."""


class ConfigError(ValidationError):
    """A configuration file failed to parse or validate.

    Carries the 1-based line (and column, when meaningful) of the offense so
    callers can point at the exact spot in the file.
    """

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}: " if column is None else f"line {line}, col {column}: "
        super().__init__(loc + message)
        self.line = line
        self.column = column
