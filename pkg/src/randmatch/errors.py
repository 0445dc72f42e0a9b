"""Exception types raised across the package."""


class RandMatchError(Exception):
    """Base class for all domain errors."""


class DomainError(RandMatchError):
    """Problem has no acceptable answer (infeasible, floor too high, ...)."""


class UsageError(RandMatchError, ValueError):
    """Malformed input or invalid parameter."""


class InvalidCap(UsageError):
    pass


class IrrationalCap(UsageError):
    pass


class InvalidSpec(UsageError):
    pass


class InvalidParameter(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


class MalformedInput(UsageError):
    pass


class ParseError(UsageError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NegativeSimilarity(ParseError):
    pass


class UnknownLevel(ParseError):
    pass


class NotDifferentiable(UsageError):
    pass


class CapTooSmall(DomainError):
    pass


class Infeasible(DomainError):
    pass


class FloorUnachievable(DomainError):
    pass


class NonMonotoneDetected(DomainError):
    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence or {}
