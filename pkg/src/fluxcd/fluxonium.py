"""Fluxonium Hamiltonian in the harmonic (LC) basis.

The circuit Hamiltonian is

    H_f = 4 E_C n^2 + E_J cos(phi) + E_L/2 (phi - 2 pi dphi)^2

with ``dphi`` the external flux measured from the half-flux sweet spot, in units
of the flux quantum. Writing ``phi = phi' + 2 pi dphi`` turns the inductive term
into the LC oscillator of plasma frequency sqrt(8 E_L E_C) and moves the flux
offset into the Josephson term, cos(phi' + 2 pi dphi). The usual
``-E_J cos`` form with the offset measured from zero flux is the same operator
after phi -> phi + pi; only this ``+E_J cos`` form is used in the package.

Energies are linear frequencies in GHz (E/h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ValidationError

CONVERGENCE_TOL = 1e-6  # GHz


@dataclass(frozen=True)
class FluxoniumSpec:
    """Circuit energies in GHz and static flux offset in flux quanta."""

    e_j: float
    e_l: float
    e_c: float
    delta_phi: float = 0.0

    def __post_init__(self):
        for name in ("e_j", "e_l", "e_c"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.delta_phi):
            raise ValidationError("delta_phi must be finite")

    @property
    def reduced_flux(self) -> float:
        """delta_phi folded into [-0.5, 0.5)."""
        return float((self.delta_phi + 0.5) % 1.0 - 0.5)

    @property
    def plasma_frequency(self) -> float:
        return float(np.sqrt(8.0 * self.e_l * self.e_c))

    @property
    def phi_zpf(self) -> float:
        return float((2.0 * self.e_c / self.e_l) ** 0.25)

    def as_dict(self) -> dict:
        return {"e_j": self.e_j, "e_l": self.e_l, "e_c": self.e_c, "delta_phi": self.delta_phi}


@dataclass(frozen=True, eq=False)
class FluxoniumModel:
    """Lowest ``levels_kept`` eigenpairs of a fluxonium.

    ``phi_elems[i, j] = <i|phi|j>`` is real symmetric and ``n_elems[i, j]`` holds
    Im <i|n|j>; the charge operator is purely imaginary in the real-wavefunction
    gauge used here, so ``<i|n|j> = 1j * n_elems[i, j]``.
    """

    spec: FluxoniumSpec
    levels_kept: int
    basis_dim: int
    energies: np.ndarray
    phi_elems: np.ndarray
    n_elems: np.ndarray
    eigvecs: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.energies, self.phi_elems, self.n_elems, self.eigvecs):
            arr.setflags(write=False)

    @property
    def charge_operator(self) -> np.ndarray:
        """Complex matrix of n in the eigenbasis."""
        return 1j * self.n_elems

    def qubit_frequency(self) -> float:
        return float(self.energies[1] - self.energies[0])


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def _hermite_functions(x: np.ndarray, dim: int) -> np.ndarray:
    """Normalized Hermite functions h_0..h_{dim-1} evaluated at ``x``."""
    out = np.empty((dim, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if dim > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for m in range(2, dim):
        out[m] = np.sqrt(2.0 / m) * x * out[m - 1] - np.sqrt((m - 1) / m) * out[m - 2]
    return out


def _fix_gauge(vecs: np.ndarray) -> np.ndarray:
    """Flip signs so each wavefunction's largest real-space value is positive.

    Odd states at the sweet spot have two extrema of equal size and opposite
    sign; ties (within 1e-6 relative) go to the extremum at larger phi.
    """
    dim = vecs.shape[0]
    # basis functions in the dimensionless coordinate x = phi' / (sqrt(2) phi_zpf)
    xmax = np.sqrt(2.0 * dim + 1.0) + 3.0
    x = np.linspace(-xmax, xmax, 8 * dim + 1)
    psi = vecs.T @ _hermite_functions(x, dim)
    fixed = vecs.copy()
    for k, wave in enumerate(psi):
        mag = np.abs(wave)
        candidates = np.flatnonzero(mag >= (1.0 - 1e-6) * mag.max())
        if wave[candidates[-1]] < 0:
            fixed[:, k] *= -1.0
    return fixed


def _diagonalize(spec: FluxoniumSpec, basis_dim: int):
    # cos(phi) is built in a padded basis and cropped, which keeps the
    # truncation error of the operator function away from the kept block
    pad = 2 * basis_dim
    b = _ladder(pad)
    x = spec.phi_zpf * (b + b.T)
    lam, vec = np.linalg.eigh(x)
    offset = 2.0 * np.pi * spec.reduced_flux
    cos_phi = ((vec * np.cos(lam + offset)) @ vec.T)[:basis_dim, :basis_dim]

    n_ho = np.arange(basis_dim)
    hamiltonian = spec.e_j * cos_phi
    hamiltonian[n_ho, n_ho] += spec.plasma_frequency * (n_ho + 0.5)
    return np.linalg.eigh(hamiltonian)


def build_fluxonium(
    spec: FluxoniumSpec,
    basis_dim: int = 120,
    levels_kept: int = 12,
    check_convergence: bool = True,
) -> FluxoniumModel:
    """Diagonalize the fluxonium and return its lowest ``levels_kept`` levels.

    Raises ConvergenceError when doubling ``basis_dim`` moves the highest kept
    level by more than 1e-6 GHz.
    """
    if levels_kept < 2:
        raise ValidationError("levels_kept must be at least 2")
    if basis_dim < 4 * levels_kept:
        raise ValidationError(
            f"basis_dim={basis_dim} is below 4 x levels_kept={4 * levels_kept}"
        )

    evals, evecs = _diagonalize(spec, basis_dim)
    energies = evals[:levels_kept] - evals[0]
    vecs = _fix_gauge(evecs[:, :levels_kept])

    if check_convergence:
        ref, _ = _diagonalize(spec, 2 * basis_dim)
        ref = ref[:levels_kept] - ref[0]
        shift = float(np.max(np.abs(ref - energies)))
        if shift > CONVERGENCE_TOL:
            raise ConvergenceError(
                f"fluxonium spectrum not converged at basis_dim={basis_dim}: "
                f"levels move by {shift:.2e} GHz when the basis is doubled"
            )

    b = _ladder(basis_dim)
    phi_ho = spec.phi_zpf * (b + b.T)
    n_ho = 0.5 / spec.phi_zpf * (b.T - b)  # n = 1j * n_ho

    phi_elems = vecs.T @ phi_ho @ vecs + 2.0 * np.pi * spec.reduced_flux * np.eye(levels_kept)
    n_elems = vecs.T @ n_ho @ vecs
    # symmetrize away round-off so the documented invariants hold exactly
    phi_elems = 0.5 * (phi_elems + phi_elems.T)
    n_elems = 0.5 * (n_elems - n_elems.T)

    return FluxoniumModel(
        spec=spec,
        levels_kept=levels_kept,
        basis_dim=basis_dim,
        energies=energies,
        phi_elems=phi_elems,
        n_elems=n_elems,
        eigvecs=vecs,
    )


def transition_frequency(model: FluxoniumModel, k: int, j: int) -> float:
    """E_j - E_k in GHz."""
    for idx in (k, j):
        if not 0 <= idx < model.levels_kept:
            raise IndexError(f"level {idx} outside 0..{model.levels_kept - 1}")
    return float(model.energies[j] - model.energies[k])

