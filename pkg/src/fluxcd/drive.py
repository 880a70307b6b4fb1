"""Two-tone echoed drive.

The fluxonium sees f(t) phi and the oscillator sees c_SD f(t) (a + a^dag) with

    f(t) = A Omega(t) cos(2 pi omega_d t + carrier_phase).

Omega is a unit-peak envelope whose second half is the sign-flipped copy of the
first, so the displacement keeps accumulating after the mid-gate echo X.
``A`` and ``omega_d`` are linear frequencies in GHz, time is in ns.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.integrate import quad

from .coupled import CoupledSpectrum, OscillatorSpec, annihilation, dressed_oscillator_frequency
from .errors import ValidationError
from .fluxonium import FluxoniumModel

ENVELOPES = ("sin2", "gaussian")
GAUSS_HALF_WIDTH = 3.0  # sigmas per half-gate


@dataclass(frozen=True)
class PulseSpec:
    amplitude_a: float
    gate_time_t: float
    envelope_kind: str = "sin2"
    echo: bool = True

    def __post_init__(self):
        if not np.isfinite(self.amplitude_a) or self.amplitude_a < 0:
            raise ValidationError("amplitude_a must be >= 0")
        if not np.isfinite(self.gate_time_t) or self.gate_time_t <= 0:
            raise ValidationError("gate_time_t must be > 0")
        if self.envelope_kind not in ENVELOPES:
            raise ValidationError(f"envelope_kind must be one of {ENVELOPES}")


def _half_shape(s: np.ndarray, half: float, kind: str) -> np.ndarray:
    """Unit-peak hump on [0, half] vanishing at both ends."""
    if kind == "sin2":
        return np.sin(np.pi * s / half) ** 2
    sigma = half / (2.0 * GAUSS_HALF_WIDTH)
    floor = math.exp(-0.5 * GAUSS_HALF_WIDTH**2)
    return (np.exp(-0.5 * ((s - 0.5 * half) / sigma) ** 2) - floor) / (1.0 - floor)


def envelope(t, spec: PulseSpec):
    """Omega(t) on [0, T]; scalar in, scalar out."""
    t_arr = np.asarray(t, dtype=float)
    T = spec.gate_time_t
    slack = 1e-12 * T
    if np.any(t_arr < -slack) or np.any(t_arr > T + slack):
        raise ValidationError(f"t outside [0, {T}] ns")
    t_arr = np.clip(t_arr, 0.0, T)
    half = 0.5 * T
    second = t_arr > half
    s = np.where(second, t_arr - half, t_arr)
    out = _half_shape(s, half, spec.envelope_kind)
    if spec.echo:
        out = np.where(second, -out, out)
    return float(out) if out.ndim == 0 else out


def envelope_mean(spec: PulseSpec) -> float:
    """(1/T) int_0^T |Omega| dt."""
    if spec.envelope_kind == "sin2":
        return 0.5
    value, _ = quad(lambda s: _half_shape(np.asarray(s), 1.0, spec.envelope_kind), 0.0, 1.0)
    return float(value)


@dataclass(frozen=True)
class DriveSchedule:
    pulse: PulseSpec
    omega_d: float
    c_sd: float
    darkened_branch: int = 1
    carrier_phase: float = 0.0

    def __post_init__(self):
        if self.darkened_branch not in (0, 1):
            raise ValidationError("darkened_branch must be 0 or 1")
        if not np.isfinite(self.omega_d) or self.omega_d <= 0:
            raise ValidationError("omega_d must be positive")

    @property
    def echo_time(self) -> float:
        return 0.5 * self.pulse.gate_time_t

    @property
    def active_branch(self) -> int:
        return 1 - self.darkened_branch

    def flux_tone(self, t):
        """f(t) in GHz."""
        carrier = np.cos(2.0 * np.pi * self.omega_d * np.asarray(t, dtype=float) + self.carrier_phase)
        return self.pulse.amplitude_a * envelope(t, self.pulse) * carrier

    def sd_tone(self, t):
        return self.c_sd * self.flux_tone(t)

    def with_pulse(self, **changes) -> "DriveSchedule":
        return replace(self, pulse=replace(self.pulse, **changes))

    def to_record(self) -> dict:
        pulse = asdict(self.pulse)
        return {
            "A": pulse["amplitude_a"],
            "T": pulse["gate_time_t"],
            "envelope": pulse["envelope_kind"],
            "echo": pulse["echo"],
            "omega_d": self.omega_d,
            "c_sd": self.c_sd,
            "mu": self.darkened_branch,
            "carrier_phase": self.carrier_phase,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DriveSchedule":
        pulse = PulseSpec(rec["A"], rec["T"], rec["envelope"], rec.get("echo", True))
        return cls(pulse, rec["omega_d"], rec["c_sd"], rec["mu"], rec.get("carrier_phase", 0.0))


def sd_coefficient(rates, darkened: int) -> float:
    """c_SD = -r_mu for rates (r_0, r_1)."""
    if darkened not in (0, 1):
        raise ValidationError("darkened branch must be 0 or 1")
    return -float(rates[darkened])


def drive_frequency(spec: CoupledSpectrum, nu: int) -> float:
    """Dressed oscillator frequency of the driven (non-darkened) branch."""
    return dressed_oscillator_frequency(spec, nu)


def flux_modulation_amplitude(amplitude_a: float, e_l: float) -> float:
    """Peak external-flux excursion A / (2 pi E_L) in flux quanta."""
    if e_l <= 0:
        raise ValidationError("e_l must be positive")
    return amplitude_a / (2.0 * np.pi * e_l)


def build_drive_operators(model: FluxoniumModel, osc: OscillatorSpec) -> tuple[np.ndarray, np.ndarray]:
    """phi (x) 1 and 1 (x) (a + a^dag) on the bare product space."""
    a = annihilation(osc.fock_cutoff)
    flux = np.kron(model.phi_elems, np.eye(osc.fock_cutoff))
    quad_op = np.kron(np.eye(model.levels_kept), a + a.T)
    return flux.astype(complex), quad_op.astype(complex)
