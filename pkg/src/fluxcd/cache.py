"""Content-addressed on-disk cache of coupled diagonalizations.

Entries are ``<sha256>.npz`` files keyed by the fluxonium and oscillator
parameters, g, the kept level count and the harmonic basis size. Writes go to
a temporary file in the cache directory and are renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .coupled import CoupledSpectrum, OscillatorSpec, build_coupled
from .fluxonium import FluxoniumSpec, build_fluxonium

ENV_VAR = "FLUXCD_CACHE"
SCHEMA = 1


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "fluxcd"


def cache_key(fluxonium: FluxoniumSpec, osc: OscillatorSpec, g: float, levels_kept: int, basis_dim: int) -> str:
    payload = {
        "schema": SCHEMA,
        "fluxonium": fluxonium.as_dict(),
        "oscillator": osc.as_dict(),
        "g": float(g),
        "levels_kept": int(levels_kept),
        "basis_dim": int(basis_dim),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _atomic_save(path: Path, arrays: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def cached_coupled(
    fluxonium: FluxoniumSpec,
    osc: OscillatorSpec,
    g: float,
    levels_kept: int = 12,
    basis_dim: int = 120,
    cache_dir: Path | str | None = None,
) -> CoupledSpectrum:
    """build_coupled with the labeled eigenpairs cached on disk.

    ``cache_dir=None`` uses :func:`default_cache_dir`. The fluxonium model is
    rebuilt on every call (it is cheap); only the coupled eigenproblem is cached.
    """
    model = build_fluxonium(fluxonium, basis_dim=basis_dim, levels_kept=levels_kept)
    root = default_cache_dir() if cache_dir is None else Path(cache_dir)
    path = root / f"{cache_key(fluxonium, osc, g, levels_kept, basis_dim)}.npz"
    if path.exists():
        try:
            with np.load(path) as data:
                return CoupledSpectrum(model=model, osc=osc, g=float(g), energies=data["energies"],
                                       u0=data["u0"], overlap_quality=data["overlap_quality"])
        except (OSError, KeyError, ValueError):
            path.unlink(missing_ok=True)  # corrupt entry: recompute
    spec = build_coupled(model, osc, g)
    _atomic_save(path, {"energies": spec.energies, "u0": spec.u0, "overlap_quality": spec.overlap_quality})
    return spec
