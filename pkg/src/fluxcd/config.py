"""Experiment configuration read from YAML (JSON is accepted as a YAML subset).

Every section is checked against a fixed key set; unknown keys are errors.
See the README for the full schema.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .coupled import OscillatorSpec
from .design import SelectionConstraints
from .drive import PulseSpec
from .errors import ValidationError
from .evolve import PropagationConfig
from .fluxonium import FluxoniumSpec


@dataclass(frozen=True)
class ScanWindow:
    start: float = 4.8
    stop: float = 5.3
    step: float = 1e-3
    extract: bool = False  # add non-perturbative r_CD columns

    def __post_init__(self):
        if not (self.step > 0 and self.stop >= self.start):
            raise ValidationError("scan window needs step > 0 and stop >= start")


@dataclass(frozen=True)
class GateOptions:
    calibrate: str = "time"  # time | amplitude | none
    darkened_branch: int = 1
    selective_darkening: bool = True  # False sets c_SD = 0
    carrier_phase: float = 0.0

    def __post_init__(self):
        if self.calibrate not in ("time", "amplitude", "none"):
            raise ValidationError("gate.calibrate must be time, amplitude or none")
        if self.darkened_branch not in (0, 1):
            raise ValidationError("gate.darkened_branch must be 0 or 1")


@dataclass(frozen=True)
class SweepOptions:
    gate_times: tuple = ()
    flux_deviations: tuple = ()


@dataclass(frozen=True)
class ToyOptions:
    ratios: tuple = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
    amplitude_a: float = 0.95
    gate_time: float = 380.0
    r_cd: float = 2.4e-3
    levels: int = 3
    mu: int = 1
    i: int = 6
    fock_cutoff: int = 30
    n_in: int = 10
    steps_per_carrier_period: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    fluxonium: FluxoniumSpec
    oscillator: OscillatorSpec
    g: float
    levels_kept: int = 12
    basis_dim: int = 120
    constraints: SelectionConstraints = SelectionConstraints()
    pulse: PulseSpec = PulseSpec(0.3, 250.0)
    target_length: float = 1.6
    n_in: int = 10
    propagation: PropagationConfig = PropagationConfig()
    scan: ScanWindow = ScanWindow()
    gate: GateOptions = GateOptions()
    sweep: SweepOptions = SweepOptions()
    budget: SweepOptions = SweepOptions()
    toy: ToyOptions = ToyOptions()
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def digest(self) -> str:
        """Content hash of the normalized configuration."""
        payload = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _build(cls, data, section: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"section '{section}' must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) in '{section}': {', '.join(unknown)}")
    types = {f.name: f.type for f in fields(cls)}
    values = {k: _coerce(v, types[k], f"{section}.{k}") for k, v in data.items()}
    try:
        return cls(**values)
    except TypeError as exc:
        raise ValidationError(f"section '{section}': {exc}") from None


def _coerce(value, kind: str, where: str):
    """Check a scalar or list against its annotated type name."""
    kind = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    bad = ValidationError(f"{where}: expected {kind}, got {value!r}")
    if kind == "bool":
        if not isinstance(value, bool):
            raise bad
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise bad
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise bad
        return value
    if kind == "tuple":
        if not isinstance(value, (list, tuple)):
            raise bad
        return tuple(_coerce(v, "float", where) for v in value)
    return value


TOP_LEVEL = {
    "fluxonium", "oscillator", "g", "levels_kept", "basis_dim", "constraints", "pulse",
    "target_length", "n_in", "propagation", "scan", "gate", "sweep", "budget", "toy",
}


def config_from_dict(data: dict) -> ExperimentConfig:
    from . import PRESETS

    if not isinstance(data, dict):
        raise ValidationError("configuration must be a mapping")
    unknown = sorted(set(data) - TOP_LEVEL)
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(unknown)}")
    for key in ("fluxonium", "oscillator", "g"):
        if key not in data:
            raise ValidationError(f"missing required key '{key}'")

    flux = data["fluxonium"]
    if isinstance(flux, str):
        if flux not in PRESETS:
            raise ValidationError(f"unknown fluxonium preset {flux!r}; choose from {sorted(PRESETS)}")
        fspec = PRESETS[flux]
    elif isinstance(flux, dict) and "preset" in flux:
        extra = {k: v for k, v in flux.items() if k != "preset"}
        if flux["preset"] not in PRESETS:
            raise ValidationError(f"unknown fluxonium preset {flux['preset']!r}")
        merged = {**asdict(PRESETS[flux["preset"]]), **extra}
        fspec = _build(FluxoniumSpec, merged, "fluxonium")
    else:
        fspec = _build(FluxoniumSpec, flux, "fluxonium")

    try:
        g = float(data["g"])
        levels_kept = int(data.get("levels_kept", 12))
        basis_dim = int(data.get("basis_dim", 120))
        target_length = float(data.get("target_length", 1.6))
        n_in = int(data.get("n_in", 10))
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from None

    pulse_data = data.get("pulse")
    return ExperimentConfig(
        fluxonium=fspec,
        oscillator=_build(OscillatorSpec, data["oscillator"], "oscillator"),
        g=g,
        levels_kept=levels_kept,
        basis_dim=basis_dim,
        constraints=_build(SelectionConstraints, data.get("constraints"), "constraints"),
        pulse=_build(PulseSpec, pulse_data, "pulse") if pulse_data is not None else PulseSpec(0.3, 250.0),
        target_length=target_length,
        n_in=n_in,
        propagation=_build(PropagationConfig, data.get("propagation"), "propagation"),
        scan=_build(ScanWindow, data.get("scan"), "scan"),
        gate=_build(GateOptions, data.get("gate"), "gate"),
        sweep=_build(SweepOptions, data.get("sweep"), "sweep"),
        budget=_build(SweepOptions, data.get("budget"), "budget"),
        toy=_build(ToyOptions, data.get("toy"), "toy"),
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from None
    return config_from_dict(data)
