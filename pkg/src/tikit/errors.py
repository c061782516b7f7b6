"""Exception hierarchy shared by all tikit modules."""


class TikitError(Exception):
    """Base class for all tikit errors."""


class DimensionError(TikitError):
    """Operand shapes are incompatible."""

    def __init__(self, expected, got, context=""):
        self.expected = expected
        self.got = got
        msg = f"shape mismatch: expected {expected}, got {got}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class ParameterError(TikitError):
    """A scalar or structural parameter is out of its admissible range."""


class PgmError(TikitError):
    """Malformed portable-graymap input.  Carries the byte offset of the fault."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class SizeCapError(TikitError):
    """Dense assembly requested beyond the configured unknown cap."""

    def __init__(self, unknowns, cap):
        self.unknowns = unknowns
        self.cap = cap
        super().__init__(f"{unknowns} unknowns exceed the dense cap of {cap}")


class WrongSolverError(TikitError):
    """Quadratic solver invoked on a non-quadratic penalizer."""


class DefinitenessError(TikitError):
    """The normal-equations operator is not positive definite."""


class StagnationError(TikitError):
    """Line search failed to find a decreasing step."""


class UnsupportedConfigError(TikitError):
    """A requested configuration has no implementation (e.g. eps=0 TV gradient)."""


class NoCornerError(TikitError):
    """L-curve points are collinear; no corner exists."""


class SweepError(TikitError):
    """Too few valid points survived an L-curve sweep."""


class ConfigError(TikitError):
    """Malformed pipeline configuration."""


class DegeneracyWarning(UserWarning):
    """Complementation constant is numerically zero; stability bounds inapplicable."""
