"""Exception and warning types raised across the package."""


class SimGapError(Exception):
    """Base class for all package errors."""


class ValidationError(SimGapError, ValueError):
    """Input violates a documented precondition."""


class IncompatibleVariant(ValidationError):
    pass


class IncompatibleHint(ValidationError):
    pass


class InvalidGamma(ValidationError):
    pass


class InvalidEta(ValidationError):
    pass


class AlphaOutOfRange(ValidationError):
    pass


class NonpositiveSigma(ValidationError):
    pass


class MissingSecondSimulator(ValidationError):
    pass


class SchemaError(ValidationError):
    """Malformed input record. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(SimGapError, ArithmeticError):
    """A computation could not meet its accuracy contract."""


class KLUndefined(NumericalError):
    """KL(u || v) is infinite: v has a zero where u has mass and no smoothing is set."""


class MeshTooCoarse(NumericalError):
    """Certified slack of a grid search exceeded the configured cap."""

    def __init__(self, slack, cap):
        self.slack = slack
        self.cap = cap
        super().__init__(f"certified slack {slack:.3g} exceeds cap {cap:.3g}; refine the mesh or raise the cap")


class DatasetInvalid(ValidationError):
    """Dataset failed validation; ``findings`` lists every violation."""

    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__("; ".join(str(f) for f in self.findings) or "invalid dataset")


class RegimeWarning(UserWarning):
    """A concentration bound is applied outside the regime where it was proved."""
