"""Exception types shared across the package."""


class MetacastError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(MetacastError, ValueError):
    """An argument violates an operation's precondition."""


class OutOfDomainError(MetacastError, ValueError):
    """A query position lies outside the field's box."""


class ParseError(MetacastError, ValueError):
    """A file could not be parsed; message carries location diagnostics."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, offset: int | None = None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        if loc:
            message = f"{': '.join(loc)}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line
        self.offset = offset
