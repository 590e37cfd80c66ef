"""Exception hierarchy shared across the package."""


class NswrankError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(NswrankError):
    """Shapes of two inputs disagree."""


class NotDoublyStochastic(NswrankError):
    """A policy matrix violates the double-stochasticity tolerance."""


class InfeasibleError(NswrankError):
    """The exposure targets cannot be realized by any valid policy."""


class ZeroMeritError(NswrankError):
    """An operation that divides by merit met a zero-merit item."""


class DegenerateMarketError(NswrankError):
    """Every item in the market has zero merit."""


class MatchingFailure(NswrankError):
    """No perfect matching exists on the thresholded support.

    Usually means entries at or below epsilon carry required mass;
    retry with a smaller epsilon.
    """


class SizeError(NswrankError):
    """Instance exceeds the enumerable bound of the brute-force oracle."""


class ParseError(NswrankError):
    """A file does not conform to its format."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SchemaError(NswrankError):
    """A JSON artifact declares an unknown or mismatched schema."""
