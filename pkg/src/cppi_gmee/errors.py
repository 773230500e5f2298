"""Exception types raised by the pricing engine, strategy code and data loaders."""


class NonPSDCorrelation(ValueError):
    """The implied 3x3 correlation matrix admits no real Cholesky-type factor."""


class InfeasibleGuarantee(ValueError):
    """The discounted guarantee is at or above initial wealth: no risk budget."""


class ZeroPortfolio(ValueError):
    """Portfolio value is zero or negative where a positive value is required."""


class InsufficientPaths(ValueError):
    """Too few Monte Carlo paths to form an estimate with a standard error."""


class ParseError(ValueError):
    """Malformed input data; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonMonotoneDates(ParseError):
    """Price series dates are not strictly increasing."""


class NonPositivePrice(ParseError):
    """Price series contains a zero or negative price."""
