"""Exception hierarchy. The CLI maps these onto exit codes."""


class NetquantError(Exception):
    pass


class ValidationError(NetquantError, ValueError):
    """Inputs violate a structural invariant (exit code 1)."""


class FormatError(ValidationError):
    """A malformed line in an input file."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class NumericalError(NetquantError, ArithmeticError):
    """A computation produced a non-finite or degenerate value (exit code 2)."""
