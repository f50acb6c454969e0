"""Exception types shared across the package."""


class ClockAuctionError(Exception):
    """Base class for all package errors."""


class ValidationError(ClockAuctionError):
    """Input violates a domain invariant (bad quantity, unknown product, ...)."""


class ParseError(ClockAuctionError):
    """A file could not be parsed; message carries the offending row."""


class SolverError(ClockAuctionError):
    """The LP/MIP solver failed numerically; never a silent wrong answer."""
