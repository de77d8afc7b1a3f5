"""Exception hierarchy shared across the package."""


class GestrecError(Exception):
    """Base class for all package errors."""


class MalformedFile(GestrecError):
    """Input file violates its format's structural rules (counts, finiteness)."""


class ParseError(GestrecError):
    """A token could not be parsed; carries its 1-based position."""

    def __init__(self, position: int, message: str):
        super().__init__(f"token {position}: {message}")
        self.position = position


class EmptySequence(GestrecError):
    """A sequence with zero frames where at least one is required."""


class SchemaError(GestrecError):
    """A generic-format record violates the schema; carries its 1-based line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DimensionError(GestrecError):
    """Pose or sequence dimensions do not agree."""


class StateError(GestrecError):
    """Operation invalid for the object's current state."""


class ParamError(GestrecError):
    """Parameter outside its admissible range."""


class DomainError(GestrecError):
    """Numeric value outside the mathematical domain of an operation."""


class LabelError(GestrecError):
    """Label set unsuitable for the requested training task."""


class NumericError(GestrecError):
    """Non-finite or otherwise unusable numeric input."""


class AlignmentError(GestrecError):
    """Matrix rows/columns not aligned with the expected identifiers."""
