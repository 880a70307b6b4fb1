"""Conditional displacement rates.

The first-order rate of branch ``k`` is

    r_k = sum_{j != k} i g n_kj phi_jk [1/(D_kj - w) - 1/(D_kj + w)],   D_kj = E_j - E_k

(unitless: a flux drive of amplitude A displaces the oscillator at A r_k / 2 in
the rotating frame). ``extract_rates`` recovers the same number
non-perturbatively from the dressed flux matrix elements with a sqrt(n) +
n^{3/2} fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coupled import CoupledSpectrum
from .errors import NumericalError, PoleProximityError
from .fluxonium import FluxoniumModel

POLE_WARN = 1e-3  # GHz
POLE_ERROR = 1e-9  # GHz


@dataclass(frozen=True)
class RateBreakdown:
    branch: int
    total: float
    per_transition: dict[int, float] = field(default_factory=dict)
    g: float = 0.0
    omega_osc: float = 0.0


@dataclass(frozen=True)
class ExtractedRates:
    r: float
    p: float
    residual: float
    fock_fit_range: int
    residual_linear: float = float("nan")


def transition_terms(model: FluxoniumModel, k: int, omega_osc: float, g: float) -> np.ndarray:
    """Per-level summands of r_k (entry k is zero)."""
    if not 0 <= k < model.levels_kept:
        raise IndexError(f"branch {k} outside the kept levels")
    detuning = model.energies - model.energies[k]
    terms = np.zeros(model.levels_kept)
    for j in range(model.levels_kept):
        if j == k:
            continue
        weight = -g * model.n_elems[k, j] * model.phi_elems[j, k]  # i g n_kj phi_jk
        if weight == 0.0:
            continue
        gap = abs(abs(detuning[j]) - omega_osc)
        if gap < POLE_ERROR:
            raise PoleProximityError(
                f"omega_osc={omega_osc} GHz sits on the {k}<->{j} transition"
            )
        if gap < POLE_WARN:
            warnings.warn(
                f"omega_osc is within {gap * 1e3:.3f} MHz of the {k}<->{j} transition",
                stacklevel=3,
            )
        terms[j] = weight * (1.0 / (detuning[j] - omega_osc) - 1.0 / (detuning[j] + omega_osc))
    return terms


def perturbative_rate(model: FluxoniumModel, k: int, omega_osc: float, g: float) -> RateBreakdown:
    terms = transition_terms(model, k, omega_osc, g)
    per = {j: float(terms[j]) for j in range(model.levels_kept) if j != k}
    return RateBreakdown(branch=k, total=float(terms.sum()), per_transition=per, g=g, omega_osc=omega_osc)


def cd_rate(model: FluxoniumModel, omega_osc: float, g: float) -> float:
    """r_CD = r_1 - r_0."""
    return perturbative_rate(model, 1, omega_osc, g).total - perturbative_rate(model, 0, omega_osc, g).total


def dominance_fractions(breakdown: RateBreakdown) -> dict[int, float]:
    if breakdown.total == 0.0:
        raise NumericalError("rate is zero; fractions undefined")
    return {j: c / breakdown.total for j, c in breakdown.per_transition.items()}


def cd_transition_fractions(model: FluxoniumModel, omega_osc: float, g: float = 1.0) -> dict[tuple[int, int], float]:
    """Share of r_CD carried by each transition (mu, j), mu in {0, 1}.

    The r_1 summands enter with + and the r_0 summands with -, so the fractions
    sum to one.
    """
    r0 = transition_terms(model, 0, omega_osc, g)
    r1 = transition_terms(model, 1, omega_osc, g)
    total = r1.sum() - r0.sum()
    if total == 0.0:
        raise NumericalError("r_CD vanishes; fractions undefined")
    out = {}
    for j in range(model.levels_kept):
        if j != 1:
            out[(1, j)] = r1[j] / total
        if j != 0:
            out[(0, j)] = -r0[j] / total
    # the (0,1) and (1,0) entries describe the same transition
    out[(0, 1)] = out[(0, 1)] + out.pop((1, 0))
    return out


def _bare_diag_elements(spec: CoupledSpectrum, op: np.ndarray, k: int, count: int) -> np.ndarray:
    idx = [spec.index(k, n) for n in range(count + 1)]
    return np.array([op[idx[n], idx[n - 1]] for n in range(1, count + 1)])


def extract_rates(
    spec: CoupledSpectrum,
    phi_eigen: np.ndarray | None = None,
    k: int = 0,
    fock_fit_range: int = 10,
) -> ExtractedRates:
    """Least-squares fit of <phi_{k,n}|phi|phi_{k,n-1}> = r sqrt(n) + p n^{3/2}.

    ``phi_eigen`` is the flux operator between labeled dressed states (defaults
    to ``spec.phi_dressed``). The fit runs over n = 1..fock_fit_range with the
    closed-form 2x2 normal equations.
    """
    if fock_fit_range < 2:
        raise NumericalError("fock_fit_range must be >= 2 for a two-parameter fit")
    if fock_fit_range > spec.osc.fock_cutoff - 1:
        raise NumericalError("fock_fit_range exceeds the Fock cutoff")
    op = spec.phi_dressed if phi_eigen is None else phi_eigen
    y = np.real(_bare_diag_elements(spec, op, k, fock_fit_range))
    n = np.arange(1, fock_fit_range + 1, dtype=float)
    s = np.sqrt(n)
    t = n**1.5
    a11, a12, a22 = s @ s, s @ t, t @ t
    b1, b2 = s @ y, t @ y
    det = a11 * a22 - a12 * a12
    if abs(det) < 1e-12 * a11 * a22:
        raise NumericalError("degenerate normal equations")
    r = (a22 * b1 - a12 * b2) / det
    p = (a11 * b2 - a12 * b1) / det
    resid = float(np.linalg.norm(y - r * s - p * t))
    r_lin = b1 / a11
    resid_lin = float(np.linalg.norm(y - r_lin * s))
    return ExtractedRates(r=float(r), p=float(p), residual=resid, fock_fit_range=fock_fit_range,
                          residual_linear=resid_lin)


def extracted_cd_rate(spec: CoupledSpectrum, fock_fit_range: int = 10) -> tuple[float, float]:
    """(r_CD, p_CD) from the fits of branches 1 and 0."""
    one = extract_rates(spec, k=1, fock_fit_range=fock_fit_range)
    zero = extract_rates(spec, k=0, fock_fit_range=fock_fit_range)
    return one.r - zero.r, one.p - zero.p
