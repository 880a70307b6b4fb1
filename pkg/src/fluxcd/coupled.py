"""Static fluxonium-oscillator Hamiltonian and branch labeling.

    H_sys = H_f (x) 1 + omega_osc 1 (x) a^dag a + i g n (x) (a - a^dag)

is diagonalized densely. Every eigenvector is labeled by the bare product state
``|i, n>`` it overlaps most; the labeled eigenvectors are the columns of ``u0`` so
that ``|phi_{i,n}> = u0 |i, n>``. The Hamiltonian is real symmetric in the
gauge of :mod:`fluxcd.fluxonium`, hence ``u0`` is real orthogonal.

Bare product index ordering is ``i * fock_cutoff + n`` everywhere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import HybridizationError, ValidationError
from .fluxonium import FluxoniumModel

LARGE_DIM = 4000


@dataclass(frozen=True)
class OscillatorSpec:
    omega_osc: float  # GHz
    fock_cutoff: int = 45

    def __post_init__(self):
        if not np.isfinite(self.omega_osc) or self.omega_osc <= 0:
            raise ValidationError("omega_osc must be positive")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ValidationError("fock_cutoff must be an integer >= 2")

    def as_dict(self) -> dict:
        return {"omega_osc": self.omega_osc, "fock_cutoff": self.fock_cutoff}


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


@dataclass(eq=False)
class CoupledSpectrum:
    """Labeled eigenpairs of the static coupled Hamiltonian.

    ``energies[i, n]`` is the dressed energy (GHz) of ``|phi_{i,n}>`` and
    ``overlap_quality[i, n] = |<i,n|phi_{i,n}>|^2``.
    """

    model: FluxoniumModel
    osc: OscillatorSpec
    g: float
    energies: np.ndarray
    u0: np.ndarray
    overlap_quality: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.model.levels_kept, self.osc.fock_cutoff

    @property
    def dim(self) -> int:
        k, n = self.dims
        return k * n

    def index(self, i: int, n: int) -> int:
        k, nmax = self.dims
        if not (0 <= i < k and 0 <= n < nmax):
            raise KeyError(f"label ({i}, {n}) outside {self.dims}")
        return i * nmax + n

    def energy(self, i: int, n: int) -> float:
        self.index(i, n)
        return float(self.energies[i, n])

    @property
    def flat_energies(self) -> np.ndarray:
        return self.energies.reshape(-1)

    def to_dressed(self, op: np.ndarray) -> np.ndarray:
        """Matrix of a bare-basis operator between labeled eigenstates."""
        return self.u0.T @ op @ self.u0

    def to_bare(self, op: np.ndarray) -> np.ndarray:
        return self.u0 @ op @ self.u0.T

    @cached_property
    def phi_bare(self) -> np.ndarray:
        return np.kron(self.model.phi_elems, np.eye(self.osc.fock_cutoff))

    @cached_property
    def quadrature_bare(self) -> np.ndarray:
        a = annihilation(self.osc.fock_cutoff)
        return np.kron(np.eye(self.model.levels_kept), a + a.T)

    @cached_property
    def phi_dressed(self) -> np.ndarray:
        """<phi_{i,n}| phi |phi_{j,m}> in bare-label ordering."""
        out = self.to_dressed(self.phi_bare)
        return 0.5 * (out + out.T)

    @cached_property
    def quadrature_dressed(self) -> np.ndarray:
        out = self.to_dressed(self.quadrature_bare)
        return 0.5 * (out + out.T)


def coupled_hamiltonian(model: FluxoniumModel, osc: OscillatorSpec, g: float) -> np.ndarray:
    nmax = osc.fock_cutoff
    a = annihilation(nmax)
    h = np.kron(np.diag(model.energies), np.eye(nmax))
    h += np.kron(np.eye(model.levels_kept), osc.omega_osc * np.diag(np.arange(nmax, dtype=float)))
    # i g n (a - a^dag) with n = 1j * n_elems
    h += -g * np.kron(model.n_elems, a - a.T)
    return h


def label_eigenvectors(vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Greedy unique maximum-overlap assignment.

    Returns ``order`` with ``order[b]`` the eigenvector column assigned to bare
    state ``b`` and the corresponding overlaps.
    """
    dim = vecs.shape[0]
    overlaps = vecs**2 if np.isrealobj(vecs) else np.abs(vecs) ** 2
    # only entries above 0.5 can ever be valid labels, and among those each row
    # and column has at most one, so the greedy pass is also optimal
    bare, eig = np.nonzero(overlaps > 0.5)
    ranked = np.argsort(-overlaps[bare, eig], kind="stable")
    order = np.full(dim, -1)
    taken = np.zeros(dim, dtype=bool)
    for b, e in zip(bare[ranked], eig[ranked]):
        if order[b] < 0 and not taken[e]:
            order[b] = e
            taken[e] = True
    missing = np.flatnonzero(order < 0)
    if missing.size:
        b = int(missing[0])
        raise HybridizationError(b, float(overlaps[b].max()))
    return order, overlaps[np.arange(dim), order]


def build_coupled(model: FluxoniumModel, osc: OscillatorSpec, g: float) -> CoupledSpectrum:
    """Diagonalize the coupled Hamiltonian and label the dressed states."""
    if not np.isfinite(g):
        raise ValidationError("g must be finite")
    k, nmax = model.levels_kept, osc.fock_cutoff
    if k * nmax > LARGE_DIM:
        warnings.warn(f"dense diagonalization of dimension {k * nmax}", stacklevel=2)

    evals, vecs = np.linalg.eigh(coupled_hamiltonian(model, osc, g))
    try:
        order, quality = label_eigenvectors(vecs)
    except HybridizationError as exc:
        label = divmod(exc.label, nmax)
        raise HybridizationError(label, exc.overlap) from None

    u0 = vecs[:, order]
    # dominant component positive
    signs = np.sign(u0[np.arange(k * nmax), np.arange(k * nmax)])
    u0 = u0 * signs
    return CoupledSpectrum(
        model=model,
        osc=osc,
        g=float(g),
        energies=evals[order].reshape(k, nmax),
        u0=u0,
        overlap_quality=quality.reshape(k, nmax),
    )


def dressed_oscillator_frequency(spec: CoupledSpectrum, mu: int) -> float:
    """Oscillator frequency conditioned on fluxonium branch ``mu`` (GHz)."""
    return spec.energy(mu, 1) - spec.energy(mu, 0)


def dispersive_shift(spec: CoupledSpectrum) -> float:
    """chi in the convention H = chi sigma_z a^dag a with sigma_z|0> = +|0>.

    The oscillator frequencies of the two branches differ by
    ``omega_0 - omega_1 = 2 chi``.
    """
    return 0.5 * (dressed_oscillator_frequency(spec, 0) - dressed_oscillator_frequency(spec, 1))


def self_kerr(spec: CoupledSpectrum, mu: int = 0) -> float:
    """K = E_{mu,2} - 2 E_{mu,1} + E_{mu,0} (GHz)."""
    return spec.energy(mu, 2) - 2.0 * spec.energy(mu, 1) + spec.energy(mu, 0)
