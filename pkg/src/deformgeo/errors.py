"""Exception hierarchy shared by every module."""


class DeformGeoError(Exception):
    """Base class for all errors raised by deformgeo.

    ``point`` is filled in with the offending chart point when a grid sweep fails.
    """

    point = None


class ExprError(DeformGeoError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, line, column, expected=()):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class OrderTooHigh(ExprError):
    pass


class DomainError(DeformGeoError, ArithmeticError):
    """Evaluation outside a function's domain (log of nonpositive, x/0, ...)."""


class ChartOverflow(DeformGeoError):
    pass


class ChartExit(DeformGeoError):
    pass


class NoConvergence(DeformGeoError):
    pass


class JacobiViolated(DeformGeoError):
    pass


class DegenerateDeformation(DeformGeoError):
    pass


class Property1Violated(DeformGeoError):
    pass


class InverseKFailed(NoConvergence):
    pass


class Property3Violated(DeformGeoError):
    pass


class Property4Violated(DeformGeoError):
    pass


class NoFiberAction(DeformGeoError):
    pass


class DegenerateVierbein(DeformGeoError):
    pass


class DegenerateMetric(DeformGeoError):
    pass


class SingularSystem(DeformGeoError):
    pass


class StencilExit(DeformGeoError):
    pass


class ManifestError(DeformGeoError):
    """Invalid manifest; carries the offending field and, when known, a position."""

    def __init__(self, message, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        super().__init__(message + (f" [{'; '.join(where)}]" if where else ""))


class ConditioningWarning(UserWarning):
    """Richardson levels of a finite-difference estimate disagree noticeably."""
