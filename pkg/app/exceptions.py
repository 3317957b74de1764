"""
Error hierarchy for the Beltrami Field Laboratory

Every error names the module operation that raised it so the command line
can report it verbatim.
"""
from typing import Optional


class BeltramiLabError(ValueError):
    """Base class for all laboratory errors"""

    def __init__(self, message: str, operation: str = "unknown"):
        super().__init__(message)
        self.operation = operation

    def __str__(self) -> str:
        return f"{self.operation}: {super().__str__()}"


class UnsupportedOperationError(BeltramiLabError):
    pass


class DomainMembershipError(BeltramiLabError):
    pass


class ParameterError(BeltramiLabError):
    pass


class IncompatibleDomainError(BeltramiLabError):
    pass


class CatalogError(BeltramiLabError):
    pass


class ExpressionSyntaxError(BeltramiLabError):
    """Malformed expression source"""

    def __init__(self, message: str, offset: int, expected: Optional[str] = None,
                 operation: str = "exprfield.parse_field"):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail, operation)
        self.offset = offset
        self.expected = expected


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class StencilOutOfDomainError(BeltramiLabError):
    pass


class EscapeError(BeltramiLabError):
    pass


class StiffnessError(BeltramiLabError):
    pass


class OrderUndeterminedError(BeltramiLabError):
    pass


class InteriorOnlyError(BeltramiLabError):
    pass


class InsufficientDataError(BeltramiLabError):
    pass


class EmptySetError(BeltramiLabError):
    pass


class DegenerateFieldError(BeltramiLabError):
    pass


class NotTangentError(BeltramiLabError):
    pass


class NotClosedError(BeltramiLabError):
    pass


class ConfigurationError(BeltramiLabError):
    pass
