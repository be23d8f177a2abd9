"""Exception hierarchy shared across lineuplab."""


class LineupLabError(Exception):
    """Base class for all library errors."""


class InputError(LineupLabError):
    """Problem with user-supplied data (CLI exit code 2)."""


class NumericalError(LineupLabError):
    """A computation could not be carried out (CLI exit code 3)."""


class EmptyLineup(InputError):
    pass


class HeterogeneousInput(InputError):
    pass


class UnknownPlayer(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    pass


class DataIntegrity(InputError):
    pass


class InsufficientData(InputError):
    pass


class InsufficientOverlap(InputError):
    pass


class FeasibilityError(InputError):
    pass


class SingularSystem(NumericalError):
    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3g})"
        super().__init__(message)


class DomainError(NumericalError):
    pass


class BootstrapDegenerate(NumericalError):
    pass


class AdaptationWarning(UserWarning):
    """MALA acceptance rate ended outside the healthy band."""
