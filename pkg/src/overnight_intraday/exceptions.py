"""Exception hierarchy.

Everything derived from :class:`InputError` is a problem with the data or
parameters handed in by the caller; the CLI maps it to exit code 2.
"""


class InputError(ValueError):
    """Bad input data or parameters."""

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        super().__init__(message)

    def __str__(self):
        msg = super().__str__()
        where = []
        if self.path is not None:
            where.append(str(self.path))
        if self.line is not None:
            where.append(f"line {self.line}")
        if where:
            return f"{':'.join(where)}: {msg}"
        return msg


class FormatError(InputError):
    """The CSV has no usable header or is otherwise malformed."""


class SchemaError(InputError):
    """A mapped column is missing from the header."""


class EmptyInputError(InputError):
    """The file holds no data rows."""


class InsufficientDataError(InputError):
    """Fewer bars or returns than an operation needs."""


class BadOpenError(InputError):
    """A placeholder or invalid open price was found under the ``fail`` policy."""


class ReturnDomainError(InputError):
    """A transformed return fell to -100% or below."""


class SimulationAbort(InputError):
    """The simulated price path left the positive half-line."""

    def __init__(self, message, *, day):
        self.day = day
        super().__init__(message)
