"""Command-line front end.

    fluxcd <command> --config PATH [--out DIR] [--jobs N] [--cache DIR] [--plot]

Commands: spectrum | rates | design | gate | sweep | budget | toy. Each writes
``<command>.csv`` and ``<command>.json`` into the output directory. Exit codes:
0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cache import cached_coupled
from .config import ExperimentConfig, load_config
from .coupled import CoupledSpectrum, dispersive_shift, self_kerr
from .design import POLE_MARGIN, activating_transition, evaluate_point, frequency_grid, near_pole, scan_frequencies
from .drive import DriveSchedule, drive_frequency, flux_modulation_amplitude, sd_coefficient
from .errorbudget import ToyModelParams, budget_sweep, toy_model_run
from .errors import FluxcdError, NumericalError, ValidationError
from .evolve import calibrate_amplitude, calibrate_gate_time
from .fluxonium import FluxoniumModel, build_fluxonium
from .metrics import evaluate_gate
from .rates import extracted_cd_rate, perturbative_rate
from .results import ResultRecord, flatten_row, write_record

log = logging.getLogger("fluxcd")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
TOY_LEVELS = 10  # fluxonium levels used to read the toy-model matrix elements


# ---------------------------------------------------------------- shared setup


def _model(cfg: ExperimentConfig, fluxonium=None) -> FluxoniumModel:
    return build_fluxonium(fluxonium or cfg.fluxonium, basis_dim=cfg.basis_dim, levels_kept=cfg.levels_kept)


def _spectrum(cfg: ExperimentConfig, cache_dir, fluxonium=None) -> CoupledSpectrum:
    return cached_coupled(fluxonium or cfg.fluxonium, cfg.oscillator, cfg.g, cfg.levels_kept, cfg.basis_dim, cache_dir)


def schedule_for(cfg: ExperimentConfig, spec: CoupledSpectrum) -> DriveSchedule:
    """Echoed two-tone drive: c_SD darkens ``gate.darkened_branch``, the tone sits on the other branch."""
    omega = cfg.oscillator.omega_osc
    rates = [perturbative_rate(spec.model, k, omega, cfg.g).total for k in (0, 1)]
    mu = cfg.gate.darkened_branch
    c_sd = sd_coefficient(rates, mu) if cfg.gate.selective_darkening else 0.0
    return DriveSchedule(cfg.pulse, drive_frequency(spec, 1 - mu), c_sd, mu, cfg.gate.carrier_phase)


def _gate_row(spec: CoupledSpectrum, schedule: DriveSchedule, cfg: ExperimentConfig, mode: str):
    """Calibrate (``time`` | ``amplitude`` | ``none``) then score; returns (row, evaluation)."""
    if mode == "time":
        T = calibrate_gate_time(cfg.target_length, schedule, spec, cfg.propagation)
        schedule = schedule.with_pulse(gate_time_t=T)
    elif mode == "amplitude":
        A = calibrate_amplitude(cfg.target_length, schedule, spec, cfg.propagation)
        schedule = schedule.with_pulse(amplitude_a=A)
    ev = evaluate_gate(spec, schedule, cfg.target_length, cfg.n_in, cfg.propagation)
    row = {
        "omega_osc": spec.osc.omega_osc,
        "g": spec.g,
        "delta_phi": spec.model.spec.delta_phi,
        "amplitude_a": schedule.pulse.amplitude_a,
        "gate_time": schedule.pulse.gate_time_t,
        "flux_modulation": flux_modulation_amplitude(schedule.pulse.amplitude_a, spec.model.spec.e_l),
        "omega_d": schedule.omega_d,
        "c_sd": schedule.c_sd,
        "infidelity": ev.infidelity,
        "theta": ev.fidelity.theta_opt,
        "alpha_free": ev.fidelity.alpha_opt,
        "separation": ev.separation,
        "leakage": ev.report.leakage,
        "norm_drift": ev.report.norm_drift,
        "n_steps": ev.report.n_steps,
    }
    return row, ev


# ---------------------------------------------------------------- commands


def cmd_spectrum(cfg: ExperimentConfig, args) -> ResultRecord:
    model = _model(cfg)
    rows = [
        {
            "level": k,
            "energy": model.energies[k],
            "phi_0k": model.phi_elems[0, k],
            "phi_1k": model.phi_elems[1, k],
            "n_0k": model.n_elems[0, k],
            "n_1k": model.n_elems[1, k],
        }
        for k in range(model.levels_kept)
    ]
    meta = {"qubit_frequency_ghz": model.qubit_frequency()}
    return ResultRecord("spectrum", cfg.digest(), list(rows[0]), rows, meta)


def _rates_row(model, omega, g, extract, cfg, cache_dir):
    if near_pole(model, omega, POLE_MARGIN):
        return None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # far-level poles are expected inside a scan
            r0 = perturbative_rate(model, 0, omega, g).total
            r1 = perturbative_rate(model, 1, omega, g).total
            point, _ = evaluate_point(model, omega, cfg.constraints, cfg.target_length)
    except NumericalError:
        return None
    row = {"omega_osc": omega, "r_0": r0, "r_1": r1, "r_cd": r1 - r0, "ratio": point.ratio,
           "dominance": point.dominance, "mu": point.transition[0], "i": point.transition[1]}
    if extract:
        osc = replace(cfg.oscillator, omega_osc=float(omega))
        spec = cached_coupled(cfg.fluxonium, osc, g, cfg.levels_kept, cfg.basis_dim, cache_dir)
        row["r_cd_extracted"] = extracted_cd_rate(spec)[0]
    return row


def cmd_rates(cfg: ExperimentConfig, args) -> ResultRecord:
    model = _model(cfg)
    grid = frequency_grid(cfg.scan.start, cfg.scan.stop, cfg.scan.step)
    rows = _map(args.jobs, _rates_row, [(model, float(w), cfg.g, cfg.scan.extract, cfg, args.cache) for w in grid])
    kept = [r for r in rows if r is not None]
    columns = ["omega_osc", "r_0", "r_1", "r_cd", "ratio", "dominance", "mu", "i"]
    if cfg.scan.extract:
        columns.append("r_cd_extracted")
    meta = {"g": cfg.g, "grid_points": len(grid), "pole_rejected": len(grid) - len(kept)}
    return ResultRecord("rates", cfg.digest(), columns, kept, meta)


def cmd_design(cfg: ExperimentConfig, args) -> ResultRecord:
    model = _model(cfg)
    grid = frequency_grid(cfg.scan.start, cfg.scan.stop, cfg.scan.step)
    points = scan_frequencies(model, grid, cfg.constraints, cfg.target_length)
    rows = [p.as_row() for p in points]
    columns = ["mu", "i", "omega_osc", "ratio", "dominance", "g_max", "a_max", "t_min"]
    meta = {"window": "empty" if not rows else f"{rows[0]['omega_osc']:.4f}-{rows[-1]['omega_osc']:.4f} GHz",
            "accepted": len(rows)}
    omega = cfg.oscillator.omega_osc
    if not near_pole(model, omega, POLE_MARGIN):
        point, ok = evaluate_point(model, omega, cfg.constraints, cfg.target_length)
        meta["configured_point"] = {**point.as_row(), "accepted": ok}
    return ResultRecord("design", cfg.digest(), columns, rows, meta)


def cmd_gate(cfg: ExperimentConfig, args) -> ResultRecord:
    spec = _spectrum(cfg, args.cache)
    schedule = schedule_for(cfg, spec)
    row, ev = _gate_row(spec, schedule, cfg, cfg.gate.calibrate)
    row = flatten_row(row)
    meta = {"chi_ghz": dispersive_shift(spec), "kerr_ghz": self_kerr(spec),
            "activating_transition": list(activating_transition(spec.model, cfg.oscillator.omega_osc)),
            "schedule": schedule.with_pulse(amplitude_a=row["amplitude_a"], gate_time_t=row["gate_time"]).to_record()}
    if ev.report.trajectory:
        traj = [flatten_row({"t_ns": t, "alpha_cond_0": a0, "alpha_cond_1": a1, "leakage": leak})
                for t, a0, a1, leak in ev.report.trajectory]
        traj_cols = ["t_ns", "alpha_cond_0_re", "alpha_cond_0_im", "alpha_cond_1_re", "alpha_cond_1_im", "leakage"]
        paths = write_record(ResultRecord("gate", cfg.digest(), traj_cols, traj), args.out, "gate_trajectory")
        meta["trajectory_csv"] = paths[0].name
    return ResultRecord("gate", cfg.digest(), list(row), [row], meta)


def _sweep_time_row(cfg, cache_dir, T):
    spec = _spectrum(cfg, cache_dir)
    schedule = schedule_for(cfg, spec).with_pulse(gate_time_t=float(T))
    return _guarded(lambda: _gate_row(spec, schedule, cfg, "amplitude")[0], {"gate_time": float(T)})


def _sweep_flux_row(cfg, cache_dir, delta):
    fluxonium = replace(cfg.fluxonium, delta_phi=cfg.fluxonium.delta_phi + float(delta))

    def run():
        spec = _spectrum(cfg, cache_dir, fluxonium)
        schedule = schedule_for(cfg, spec)
        row = _gate_row(spec, schedule, cfg, cfg.gate.calibrate)[0]
        return {"flux_deviation": float(delta), **row}

    return _guarded(run, {"flux_deviation": float(delta)})


def _guarded(fn, base: dict) -> dict:
    try:
        return {**flatten_row(fn()), "error": ""}
    except NumericalError as exc:
        return {**base, "infidelity": math.nan, "error": f"{type(exc).__name__}: {exc}"}


SWEEP_COLUMNS = ["gate_time", "amplitude_a", "flux_modulation", "omega_d", "c_sd", "infidelity", "theta",
                 "separation_re", "separation_im", "leakage", "norm_drift", "n_steps", "error"]


def cmd_sweep(cfg: ExperimentConfig, args) -> ResultRecord:
    times, deltas = cfg.sweep.gate_times, cfg.sweep.flux_deviations
    if times and deltas:
        raise ValidationError("sweep takes either gate_times or flux_deviations, not both")
    if deltas:
        rows = _map(args.jobs, _sweep_flux_row, [(cfg, args.cache, d) for d in deltas])
        columns = ["flux_deviation", "delta_phi"] + SWEEP_COLUMNS
        kind = "flux_deviation"
    else:
        rows = _map(args.jobs, _sweep_time_row, [(cfg, args.cache, T) for T in times])
        columns = list(SWEEP_COLUMNS)
        kind = "gate_time"
    return ResultRecord("sweep", cfg.digest(), columns, rows, {"sweep": kind})


def cmd_budget(cfg: ExperimentConfig, args) -> ResultRecord:
    spec = _spectrum(cfg, args.cache)
    template = schedule_for(cfg, spec)
    rows = budget_sweep(spec, template, cfg.budget.gate_times, cfg.target_length, cfg.n_in,
                        cfg.propagation, args.jobs)
    columns = ["T", "amplitude_full", "infid_full", "amplitude_on_res", "infid_on_res",
               "leakage_fluxonium_only", "error"]
    return ResultRecord("budget", cfg.digest(), columns, rows, {"g": cfg.g})


def toy_params(cfg: ExperimentConfig, ratio: float) -> ToyModelParams:
    """Toy-model parameters from the configured fluxonium's (mu, i) matrix elements."""
    toy = cfg.toy
    levels = max(TOY_LEVELS, toy.i + 1)
    model = build_fluxonium(cfg.fluxonium, basis_dim=max(cfg.basis_dim, 4 * levels), levels_kept=levels)
    mu, i = toy.mu, toy.i
    delta = model.energies[i] - model.energies[mu]
    phi_x = abs(model.phi_elems[mu, i])
    phi_z = 0.5 * (model.phi_elems[i, i] - model.phi_elems[mu, mu])
    r_mu = toy.r_cd
    return ToyModelParams(delta, cfg.oscillator.omega_osc, toy.amplitude_a, phi_x, phi_z, r_mu,
                          r_mu * (1.0 - ratio), toy.gate_time, toy.levels, 0.0, toy.fock_cutoff,
                          toy.n_in, toy.steps_per_carrier_period)


def _toy_row(cfg, ratio):
    out = toy_model_run(toy_params(cfg, ratio))
    return {"ratio": float(ratio), **out}


def cmd_toy(cfg: ExperimentConfig, args) -> ResultRecord:
    rows = _map(args.jobs, _toy_row, [(cfg, r) for r in cfg.toy.ratios])
    columns = ["ratio", "displacement_length", "predicted_length", "infidelity", "leakage"]
    meta = {}
    if len(rows) >= 2:
        x = np.array([r["ratio"] for r in rows])
        y = np.array([r["displacement_length"] for r in rows])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        meta["linear_fit"] = {"slope": slope, "intercept": intercept,
                              "r2": 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum() or 1.0)}
    return ResultRecord("toy", cfg.digest(), columns, rows, meta)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "rates": cmd_rates,
    "design": cmd_design,
    "gate": cmd_gate,
    "sweep": cmd_sweep,
    "budget": cmd_budget,
    "toy": cmd_toy,
}


# ---------------------------------------------------------------- plumbing


def _map(jobs: int, fn, arg_list):
    if jobs > 1 and len(arg_list) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(arg_list))) as pool:
            futures = [pool.submit(fn, *a) for a in arg_list]
            return [f.result() for f in futures]
    return [fn(*a) for a in arg_list]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxcd", description="Fluxonium-oscillator CD gate lab.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="YAML or JSON experiment file")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweep rows")
    parser.add_argument("--cache", type=Path, default=None,
                        help="diagonalization cache (default: $FLUXCD_CACHE or ~/.cache/fluxcd)")
    parser.add_argument("--plot", action="store_true", help="also render <command>.png from the CSV")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        cfg = load_config(args.config)
        start = time.perf_counter()
        record = COMMANDS[args.command](cfg, args)
        record.metadata["wall_time_s"] = time.perf_counter() - start
        csv_path, json_path = write_record(record, args.out)
        if args.plot:
            from .report import render

            render(csv_path)
        log.info("wrote %s and %s", csv_path, json_path)
    except ValidationError as exc:
        print(f"fluxcd: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FluxcdError as exc:
        print(f"fluxcd: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
