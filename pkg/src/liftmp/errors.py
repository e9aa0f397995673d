"""Exception types shared across the package."""


class LiftmpError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(LiftmpError):
    """Instance parameters or contents violate a documented invariant."""


class ParseError(LiftmpError):
    """Malformed instance text. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedArityError(ParseError):
    """CNF clause does not have exactly three distinct literals."""


class ShapeError(LiftmpError):
    """Embedding matrix shape does not match the problem layout."""


class NumericError(LiftmpError):
    """Non-finite value encountered. Carries the first offending row index."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message)


class CheckpointError(LiftmpError):
    """Model or embedding checkpoint is corrupt or has the wrong version."""


class CertifyError(LiftmpError):
    """Certificate computation failed. Carries the eigensolver residual."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class TooLargeError(LiftmpError):
    """Instance exceeds the documented size limit for exhaustive search."""


class TrainError(LiftmpError):
    """Training aborted. Carries the step index and instance seed."""

    def __init__(self, message, step=None, instance_seed=None):
        self.step = step
        self.instance_seed = instance_seed
        super().__init__(message)
