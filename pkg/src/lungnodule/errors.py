"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` (and its subclasses) to 2,
``NumericalError`` to 3.
"""


class ShapeError(ValueError):
    """Operand shapes are incompatible with an operation."""


class DataError(ValueError):
    """Input data is missing, malformed, or semantically unusable."""


class FormatError(DataError):
    """A binary or text file does not follow its declared format."""


class NumericalError(ArithmeticError):
    """A value became non-finite where finite values are required."""
