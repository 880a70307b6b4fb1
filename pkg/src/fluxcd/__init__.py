"""Cross-resonance conditional-displacement gates between a fluxonium and an oscillator."""

from .errors import (
    CalibrationError,
    ConvergenceError,
    CutoffError,
    FluxcdError,
    HybridizationError,
    NumericalError,
    PoleProximityError,
    StepSizeError,
    ValidationError,
)
from .fluxonium import FluxoniumModel, FluxoniumSpec, build_fluxonium, transition_frequency
from .coupled import (
    CoupledSpectrum,
    OscillatorSpec,
    build_coupled,
    dispersive_shift,
    dressed_oscillator_frequency,
    self_kerr,
)

__version__ = "0.1.0"

# Reference parameter sets (GHz, flux in units of the flux quantum).
F1 = FluxoniumSpec(e_j=3.395, e_l=0.132, e_c=0.479, delta_phi=0.0)
F2 = FluxoniumSpec(e_j=3.27, e_l=0.125, e_c=0.462, delta_phi=0.0)
F3 = FluxoniumSpec(e_j=5.71, e_l=0.59, e_c=1.3, delta_phi=0.08)
F4 = FluxoniumSpec(e_j=4.0, e_l=1.0, e_c=1.0, delta_phi=0.017)
PRESETS = {"F1": F1, "F2": F2, "F3": F3, "F4": F4}
