"""Exception hierarchy shared by the numerical modules and the CLI."""


class FluxcdError(Exception):
    """Base class for all package errors."""


class ValidationError(FluxcdError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class NumericalError(FluxcdError, RuntimeError):
    """A computation ran but its result cannot be trusted."""


class ConvergenceError(NumericalError):
    pass


class HybridizationError(NumericalError):
    """Dressed-state labeling is ambiguous (overlap <= 0.5)."""

    def __init__(self, label, overlap):
        self.label = label
        self.overlap = overlap
        super().__init__(
            f"state {label} is strongly hybridized: max overlap {overlap:.3f} <= 0.5"
        )


class PoleProximityError(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass


class CutoffError(NumericalError):
    pass


class CalibrationError(NumericalError):
    pass


class AmplitudeError(NumericalError):
    """Coherent amplitude requested for an (almost) unpopulated branch."""
