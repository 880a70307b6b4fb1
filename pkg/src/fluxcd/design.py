"""Operating-point selection from the fluxonium spectrum alone.

A grid point is accepted when

* the activating transition's share of r_CD exceeds ``DOMINANCE_THRESHOLD`` (a single dominant transition), and
* the rate mismatch |r_i - r_mu| / |r_CD| stays below ``c_r``.

The activating transition is the allowed (mu, i >= 2) transition whose pole
dominates the local frequency dependence of the rates; its signed share of r_CD
is the dominance. The coupling and drive bounds then follow from the (mu, i)
matrix elements and the detuning D_{mu,i} - omega_osc.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError, PoleProximityError, ValidationError
from .fluxonium import FluxoniumModel
from .rates import cd_rate, cd_transition_fractions, perturbative_rate

DOMINANCE_THRESHOLD = 0.5
POLE_MARGIN = 2e-3  # GHz
MATRIX_ELEMENT_FLOOR = 1e-12
BOUND_CAP = 1e6  # GHz


@dataclass(frozen=True)
class SelectionConstraints:
    c_r: float = 0.2
    c_g: float = 0.1
    c_a: float = 1.0
    n_levels: int = 10

    def __post_init__(self):
        if min(self.c_r, self.c_g, self.c_a) < 0 or self.n_levels <= 0:
            raise ValidationError("selection constraints must be positive")


@dataclass(frozen=True)
class OperatingPoint:
    transition: tuple[int, int]
    omega_osc: float
    ratio: float
    dominance: float
    g_max: float
    a_max: float
    t_min: float

    def as_row(self) -> dict:
        row = asdict(self)
        mu, i = row.pop("transition")
        return {"mu": mu, "i": i, **row}


def frequency_grid(start: float, stop: float, step: float = 1e-3) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(count), 12)


def near_pole(model: FluxoniumModel, omega: float, margin: float) -> bool:
    for k in (0, 1):
        gaps = np.abs(np.abs(model.energies - model.energies[k]) - omega)
        live = np.abs(model.n_elems[k] * model.phi_elems[:, k]) > 0
        live[k] = False
        if np.any(gaps[live] < margin):
            return True
    return False


def rate_mismatch(model: FluxoniumModel, mu: int, i: int, omega_osc: float) -> float:
    """|r_i - r_mu| / |r_CD| (independent of g)."""
    r_i = perturbative_rate(model, i, omega_osc, 1.0).total
    r_mu = perturbative_rate(model, mu, omega_osc, 1.0).total
    return abs(r_i - r_mu) / abs(cd_rate(model, omega_osc, 1.0))


def max_coupling(model: FluxoniumModel, mu: int, i: int, omega_osc: float,
                 constraints: SelectionConstraints = SelectionConstraints()) -> float:
    """g_max = C_g |D_{mu,i} - w| / (sqrt(N) |<i|n|mu>|)."""
    elem = abs(model.n_elems[i, mu])
    detuning = abs(model.energies[i] - model.energies[mu] - omega_osc)
    if elem < MATRIX_ELEMENT_FLOOR:
        warnings.warn(f"<{i}|n|{mu}> vanishes; g_max capped at {BOUND_CAP} GHz", stacklevel=2)
        return BOUND_CAP
    return min(constraints.c_g * detuning / (math.sqrt(constraints.n_levels) * elem), BOUND_CAP)


def max_drive(model: FluxoniumModel, mu: int, i: int, omega_osc: float,
              constraints: SelectionConstraints = SelectionConstraints()) -> float:
    """A_max = C_A |D_{mu,i} - w| / |<i|phi|mu>| (GHz)."""
    elem = abs(model.phi_elems[i, mu])
    detuning = abs(model.energies[i] - model.energies[mu] - omega_osc)
    if elem < MATRIX_ELEMENT_FLOOR:
        warnings.warn(f"<{i}|phi|{mu}> vanishes; A_max capped at {BOUND_CAP} GHz", stacklevel=2)
        return BOUND_CAP
    return min(constraints.c_a * detuning / elem, BOUND_CAP)


def min_gate_time(target_length: float, a_max: float, r_cd_max: float, envelope: str = "sin2") -> float:
    """Shortest T with (1/2) (2 pi A_max) |r_CD| int_0^T |Omega| dt >= L (ns).

    ``a_max`` is a linear frequency in GHz; the displacement accumulates at the
    angular rate. Both supported envelopes integrate to T/2 over the echoed gate.
    """
    if r_cd_max == 0 or not np.isfinite(r_cd_max):
        raise NumericalError("r_cd_max must be nonzero")
    if a_max <= 0:
        raise NumericalError("a_max must be positive")
    if envelope not in ("sin2", "gaussian"):
        raise ValidationError(f"unknown envelope {envelope!r}")
    if target_length == 0:
        return 0.0
    mean_envelope = 0.5 if envelope == "sin2" else _gaussian_mean()
    return target_length / (0.5 * 2.0 * np.pi * a_max * abs(r_cd_max) * mean_envelope)


def _gaussian_mean() -> float:
    from .drive import PulseSpec, envelope_mean

    return envelope_mean(PulseSpec(amplitude_a=1.0, gate_time_t=1.0, envelope_kind="gaussian"))


def activating_transition(model: FluxoniumModel, omega: float) -> tuple[int, int]:
    """Transition (mu, i >= 2) whose rate pole is steepest at ``omega``.

    Steepness is |n_{mu,i} phi_{mu,i}| / (D_{mu,i} - omega)^2, the weight of the
    resonant summand's frequency derivative.
    """
    best, best_slope = None, 0.0
    for mu in (0, 1):
        for i in range(2, model.levels_kept):
            weight = abs(model.n_elems[i, mu] * model.phi_elems[i, mu])
            if weight < MATRIX_ELEMENT_FLOOR:
                continue
            gap = abs(model.energies[i] - model.energies[mu]) - omega
            slope = weight / gap**2 if gap else math.inf
            if slope > best_slope:
                best, best_slope = (mu, i), slope
    if best is None:
        raise NumericalError("no allowed transition out of the computational levels")
    return best


def evaluate_point(model: FluxoniumModel, omega: float,
                   constraints: SelectionConstraints = SelectionConstraints(),
                   target_length: float = 1.6) -> tuple[OperatingPoint, bool]:
    """Operating point at one frequency plus whether it passes both criteria."""
    mu, i = activating_transition(model, omega)
    dominance = cd_transition_fractions(model, omega)[(mu, i)]
    ratio = rate_mismatch(model, mu, i, omega)
    g_max = max_coupling(model, mu, i, omega, constraints)
    a_max = max_drive(model, mu, i, omega, constraints)
    r_cd_max = cd_rate(model, omega, g_max)
    t_min = min_gate_time(target_length, a_max, r_cd_max) if r_cd_max else math.inf
    point = OperatingPoint((mu, i), float(omega), float(ratio), float(dominance), g_max, a_max, t_min)
    ok = ratio <= constraints.c_r and dominance > DOMINANCE_THRESHOLD
    return point, ok


def scan_frequencies(model: FluxoniumModel, freq_grid, constraints: SelectionConstraints = SelectionConstraints(),
                     target_length: float = 1.6, pole_margin: float = POLE_MARGIN) -> list[OperatingPoint]:
    """Accepted operating points on ``freq_grid``; empty when no window exists."""
    accepted = []
    for omega in np.asarray(freq_grid, dtype=float):
        if near_pole(model, omega, pole_margin):
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # far-level poles are expected inside a scan
                point, ok = evaluate_point(model, omega, constraints, target_length)
        except (PoleProximityError, NumericalError):
            continue
        if ok:
            accepted.append(point)
    return accepted
