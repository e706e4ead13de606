"""Exception types shared across the package."""


class I4SimError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionSyntaxError(I4SimError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"syntax error at {line}:{col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnknownFunctionError(I4SimError):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        self.name = name
        self.line = line
        self.col = col
        super().__init__(f"unknown function {name!r} at {line}:{col}")


class DuplicateNameError(I4SimError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate name {name!r}")


class UnboundIdentifierError(I4SimError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound identifier {name!r}")


class DivisionByZeroError(I4SimError):
    def __init__(self, numerator: float):
        self.numerator = numerator
        super().__init__(f"division by zero with nonzero numerator {numerator!r}")


class ModelDocumentError(I4SimError):
    """Raised when a model document cannot be parsed at all (malformed JSON,

    missing required fields, bad field types). Carries line/col when the
    underlying JSON decoder provides them."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(message)


class ValidationFailedError(I4SimError):
    """Raised when an operation requires a valid model but validation found

    diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        summary = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"model failed validation: {summary}")


class NegativeStockError(I4SimError):
    def __init__(self, name: str, t: float):
        self.name = name
        self.t = t
        super().__init__(f"stock {name!r} went negative at t={t}")


class BadOverrideError(I4SimError):
    def __init__(self, name: str, reason: str):
        self.name = name
        super().__init__(f"bad override for {name!r}: {reason}")


class InvalidScenarioError(I4SimError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


class MissingSeriesError(I4SimError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"trajectory lacks required series {name!r}")


class GridTooLargeError(I4SimError):
    def __init__(self, points: int, limit: int):
        self.points = points
        self.limit = limit
        super().__init__(f"grid has {points} points, limit is {limit}")
