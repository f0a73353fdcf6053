"""Exception hierarchy. Each class maps to one CLI exit-code family."""


class SivEprError(Exception):
    """Base class for all package errors."""

    error_class = "numerical"


class UsageError(SivEprError):
    """Invalid invocation: unknown option, bad config key, missing argument."""

    error_class = "usage"


class ParseError(SivEprError):
    """Malformed input file."""

    error_class = "parse"

    def __init__(self, message, line_number=None, path=None):
        self.line_number = line_number
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}"
        if line_number is not None:
            prefix += f":{line_number}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class PreconditionError(SivEprError):
    """Input violates an operation's documented precondition."""

    error_class = "precondition"


class InconsistentInputError(PreconditionError):
    """Measured values imply a physically impossible state (no clamping)."""


class NumericalError(SivEprError):
    """A numerical procedure failed (non-convergence, degenerate solution)."""

    error_class = "numerical"


# Process exit codes by error class; 0 is success, 1 is reserved for
# unexpected crashes.
EXIT_CODES = {
    "usage": 2,
    "parse": 3,
    "precondition": 4,
    "numerical": 5,
}
