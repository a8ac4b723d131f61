"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid model parameters.

    ``codes`` lists every failed check, e.g. ``["NonPositiveSigma", "RNonPositive"]``.
    """

    def __init__(self, codes, details=None):
        self.codes = list(codes)
        self.details = list(details or [])
        msg = "; ".join(
            f"{c}: {d}" if d else c
            for c, d in zip(self.codes, self.details + [""] * len(self.codes))
        )
        super().__init__(msg)


class ConfigError(ValueError):
    """Malformed configuration document (unknown keys, wrong types)."""


class DomainOverflow(OverflowError):
    """Exponential argument outside the float64 range."""


class BracketOverflow(ArithmeticError):
    """Root bracket expansion ran past the float64 exponent range."""


class NegativeState(ValueError):
    """Value function evaluated at a negative reserve level."""


class NegativeInitialState(ValueError):
    """Path starts below zero; barrier policies need X0 >= 0."""


class IndexOutOfRange(IndexError):
    pass


class DecreasingCumulative(ValueError):
    """A cumulative control sequence has a negative increment."""


class SpecialCaseViolation(ValueError):
    """Scaling experiment requested outside the n = 1 special case."""
