"""Exception hierarchy for validation, solving, and document I/O."""


class SchroedingerError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(SchroedingerError):
    """Array dimensions disagree with the declared problem shape."""


class LengthMismatch(SchroedingerError):
    """A vector has the wrong length for its space."""


class NonPositiveEntry(SchroedingerError):
    """A weight, kernel value, or density is zero or negative."""


class NonFinite(SchroedingerError):
    """NaN or infinity found where finite data is required."""


class MassImbalance(SchroedingerError):
    """Marginal masses disagree beyond the balance tolerance."""


class Overflow(SchroedingerError):
    """A linear-domain value exceeds the floating-point range."""


class GaugeViolation(SchroedingerError):
    """A potential family does not satisfy its declared gauge."""


class SizeCapExceeded(SchroedingerError):
    """A dense assembly was requested above the configured size cap."""


class NotInRange(SchroedingerError):
    """Right-hand side is not in the range of the linearized map."""


class NotConverged(SchroedingerError):
    """Iteration budget exhausted; best iterate and report attached."""

    def __init__(self, message, potentials=None, report=None):
        super().__init__(message)
        self.potentials = potentials
        self.report = report


class LineSearchFailed(SchroedingerError):
    """No backtracking step achieved sufficient residual decrease."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BandInfeasible(SchroedingerError):
    """The requested mass cannot be realized inside the density band."""


class AllTrialsFailed(SchroedingerError):
    """Every trial of a stability experiment failed to solve."""


class ParseError(SchroedingerError):
    """Input text is not valid JSON."""


class SchemaError(SchroedingerError):
    """JSON is well formed but violates the document schema."""


class IoError(SchroedingerError):
    """A file could not be read or written."""
