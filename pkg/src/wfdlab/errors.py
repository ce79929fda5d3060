"""Exception and warning types raised across the package."""


class WfdError(Exception):
    """Base class for every error raised by wfdlab."""


class ValidationError(WfdError, ValueError):
    """Parameter or configuration rejected before any numerics ran."""


class NumericalError(WfdError, ArithmeticError):
    """A numerical procedure failed to deliver a trustworthy answer."""


# --- parameters ---------------------------------------------------------

class DimensionTooSmall(ValidationError):
    pass


class ExponentOutOfRange(ValidationError):
    pass


class WeightConstraintViolated(ValidationError):
    """One of the admissibility inequalities on (beta, gamma) fails.

    Attributes
    ----------
    inequality : str
        Human readable form of the violated inequality.
    lhs, rhs : float
        Values of both sides.
    """

    def __init__(self, inequality, lhs, rhs):
        self.inequality = inequality
        self.lhs = float(lhs)
        self.rhs = float(rhs)
        super().__init__(f"violated {inequality}: lhs={self.lhs!r}, rhs={self.rhs!r}")


class DegenerateGap(ValidationError):
    pass


class ComplexRoot(ValidationError):
    pass


class ExponentBelowRange(ValidationError):
    pass


class ConfigError(ValidationError):
    """Malformed config file; ``line`` is 1-based or None."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


# --- grids and profiles ---------------------------------------------------

class BadBounds(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class InfiniteMass(ValidationError):
    pass


class BeyondExtinction(ValidationError):
    pass


class NotSandwichable(ValidationError):
    pass


# --- functionals ----------------------------------------------------------

class NegativeField(ValidationError):
    pass


class NonpositiveField(ValidationError):
    pass


class MomentDiverges(ValidationError):
    pass


class MassMismatch(ValidationError):
    pass


class SupercriticalExponent(ValidationError):
    pass


class InconsistentPair(ValidationError):
    pass


# --- solvers --------------------------------------------------------------

class ConvergenceFailure(NumericalError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")


class RelativeMassUnsolvable(NumericalError):
    pass


class NewtonDiverged(NumericalError):
    def __init__(self, message, retries=0):
        self.retries = retries
        super().__init__(f"{message} after {retries} damping retries")


class PositivityLost(NumericalError):
    pass


class InsufficientDecay(NumericalError):
    pass


class RatesUnavailable(WfdError):
    """No rate prediction exists for this exponent range."""


# --- warnings -------------------------------------------------------------

class NearThresholdWarning(UserWarning):
    """An exponent sits within 1e-12 of a critical value."""


class OutsideValidRange(UserWarning):
    pass


class SpectralGapCollapse(UserWarning):
    pass
