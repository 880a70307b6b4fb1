"""Driven gate propagation in the dressed label basis.

States are stored as coefficient columns over the labeled eigenstates
|phi_{i,n}>. The drive is H_d(t) = 2 pi f(t) V with V = phi + c_SD (a + a^dag)
expressed between eigenstates. In the interaction picture of H_sys

    dc/dt = -i 2 pi f(t) P(t) V P(t)^* c,    P(t) = diag(exp(i 2 pi E t)),

which is integrated with fixed-step RK4 (default) or, on request, adaptive
DOP853. The echo is the permutation (0, n) <-> (1, n) applied in the
Schrodinger picture at T/2.

Results are reported in the reference frame rotating with
E_R(i, n) = E_{i,0} + n w_bar, where w_bar is the mean of the two computational
dressed oscillator frequencies. With the echo, this frame removes the
dispersive phase of both branches, so an undriven echoed gate is X up to
fluxonium phases.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .coupled import CoupledSpectrum, dressed_oscillator_frequency
from .drive import DriveSchedule
from .errors import AmplitudeError, CalibrationError, CutoffError, StepSizeError, ValidationError
from .fluxonium import FluxoniumModel
from .rates import cd_rate

NORM_TOL = 1e-6
FOCK_EDGE_TOL = 1e-4
BOUNDARY_CHECKS = 64
MIN_POPULATION = 1e-6
FRAMES = ("interaction", "lab")
METHODS = ("rk4", "dop853")
RESYNC = 512  # steps between exact phase recomputations


@dataclass(frozen=True)
class PropagationConfig:
    """Integrator settings.

    ``method="rk4"`` takes ``steps_per_carrier_period`` fixed steps per drive
    period. ``method="dop853"`` adapts its step to ``rtol`` and uses the same
    nominal grid only for sampling, so ``record_stride`` keeps its meaning.
    """

    steps_per_carrier_period: int = 24
    frame: str = "interaction"
    record_stride: int = 0  # steps between trajectory samples; 0 disables
    method: str = "rk4"
    rtol: float = 1e-10

    def __post_init__(self):
        if self.steps_per_carrier_period < 12:
            raise ValidationError("steps_per_carrier_period must be >= 12")
        if self.frame not in FRAMES:
            raise ValidationError(f"frame must be one of {FRAMES}")
        if self.record_stride < 0:
            raise ValidationError("record_stride must be >= 0")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}")
        if not 0 < self.rtol <= 1e-4:
            raise ValidationError("rtol must lie in (0, 1e-4]")


@dataclass
class GateReport:
    """Final columns in the reference frame plus diagnostics.

    ``trajectory`` rows are (t, alpha_cond_0, alpha_cond_1, leakage) for the runs
    started in |0, 0> and |1, 0>: alpha_cond_b is the coherent amplitude of the
    run occupying fluxonium branch b at time t (the echo swaps them).
    """

    final_columns: np.ndarray
    trajectory: list = field(default_factory=list)
    leakage: float = 0.0
    calibrated_t: float = float("nan")
    n_steps: int = 0  # RK4 steps, or right-hand-side evaluations for DOP853
    norm_drift: float = 0.0


# ---------------------------------------------------------------- frames


def reference_energies(spec: CoupledSpectrum) -> np.ndarray:
    """E_R(i, n) = E_{i,0} + n w_bar, flattened in label order."""
    w_bar = 0.5 * (dressed_oscillator_frequency(spec, 0) + dressed_oscillator_frequency(spec, 1))
    k, nmax = spec.dims
    return (spec.energies[:, :1] + w_bar * np.arange(nmax)[None, :]).reshape(-1)


def echo_permutation(levels: int, fock: int) -> np.ndarray:
    """Index map of the echo X: (0, n) <-> (1, n), identity elsewhere."""
    perm = np.arange(levels * fock)
    perm[:fock], perm[fock:2 * fock] = perm[fock:2 * fock].copy(), perm[:fock].copy()
    return perm


def basis_columns(spec: CoupledSpectrum, labels) -> np.ndarray:
    cols = np.zeros((spec.dim, len(labels)), dtype=complex)
    for j, (i, n) in enumerate(labels):
        cols[spec.index(i, n), j] = 1.0
    return cols


def dressed_drive_operator(spec: CoupledSpectrum, c_sd: float) -> np.ndarray:
    return spec.phi_dressed + c_sd * spec.quadrature_dressed


# ---------------------------------------------------------------- integrator


def _real_matmul(op: np.ndarray, x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(op):
        return op @ x
    m = x.shape[1]
    y = op @ np.concatenate([x.real, x.imag], axis=1)
    return y[:, :m] + 1j * y[:, m:]


def _step_count(schedule: DriveSchedule, config: PropagationConfig) -> int:
    per_ns = schedule.omega_d * config.steps_per_carrier_period
    steps = max(int(math.ceil(schedule.pulse.gate_time_t * per_ns)), 2)
    return steps + steps % 2


def _integrate(energies, op, schedule, config, columns, perm, on_sample=None, sample_every=0):
    """Integrate over [0, T]; returns Schrodinger-picture columns and the step count.

    ``on_sample(t, schrodinger_columns)`` is called every ``sample_every`` steps
    of the nominal grid and at the Fock-boundary checkpoints.
    """
    if config.method == "dop853":
        return _integrate_adaptive(energies, op, schedule, config, columns, perm, on_sample, sample_every)
    T = schedule.pulse.gate_time_t
    n_steps = _step_count(schedule, config)
    dt = T / n_steps
    w = 2.0 * np.pi * np.asarray(energies, dtype=float)
    lab = config.frame == "lab"
    c = np.array(columns, dtype=complex)
    # tone values at every half step, angular units
    tone = 2.0 * np.pi * schedule.flux_tone(np.linspace(0.0, T, 2 * n_steps + 1))
    half_turn = np.exp(0.5j * w * dt)[:, None]

    if lab:
        def deriv(ph, f, x):
            return -1j * (w[:, None] * x + f * _real_matmul(op, x))
    else:
        def deriv(ph, f, x):
            return (-1j * f) * ph * _real_matmul(op, ph.conj() * x)

    def phases(t):
        return np.exp(1j * w * t)[:, None]

    def schrodinger(t, x):
        return x if lab else phases(t).conj() * x

    half = n_steps // 2
    checkpoints = set(np.linspace(0, n_steps, BOUNDARY_CHECKS + 1).astype(int).tolist())
    ph0 = phases(0.0)
    for step in range(n_steps):
        t = step * dt
        if step % RESYNC == 0:
            ph0 = phases(t)
        if step == half and perm is not None:
            c = schrodinger(t, c)[perm]
            c = c if lab else ph0 * c
        if on_sample is not None and (step in checkpoints or (sample_every and step % sample_every == 0)):
            on_sample(t, schrodinger(t, c))
        ph1 = ph0 * half_turn
        ph2 = ph1 * half_turn
        f0, f1, f2 = tone[2 * step], tone[2 * step + 1], tone[2 * step + 2]
        k1 = deriv(ph0, f0, c)
        k2 = deriv(ph1, f1, c + 0.5 * dt * k1)
        k3 = deriv(ph1, f1, c + 0.5 * dt * k2)
        k4 = deriv(ph2, f2, c + dt * k3)
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ph0 = ph2
    final = schrodinger(T, c)
    if on_sample is not None:
        on_sample(T, final)
    return final, n_steps


def _integrate_adaptive(energies, op, schedule, config, columns, perm, on_sample, sample_every):
    """DOP853 over each half of the gate with the echo applied in between."""
    T = schedule.pulse.gate_time_t
    n_nominal = _step_count(schedule, config)
    w = 2.0 * np.pi * np.asarray(energies, dtype=float)
    lab = config.frame == "lab"
    c = np.array(columns, dtype=complex)
    shape = c.shape

    def rhs(t, y):
        x = y.reshape(shape)
        f = 2.0 * np.pi * float(schedule.flux_tone(t))
        if lab:
            return (-1j * (w[:, None] * x + f * _real_matmul(op, x))).ravel()
        ph = np.exp(1j * w * t)[:, None]
        return ((-1j * f) * ph * _real_matmul(op, ph.conj() * x)).ravel()

    def rotate(t, x, sign):
        return x if lab else np.exp(sign * 1j * w * t)[:, None] * x

    half = n_nominal // 2
    dt = T / n_nominal
    sample_steps = set(np.linspace(0, n_nominal, BOUNDARY_CHECKS + 1).astype(int).tolist())
    if sample_every:
        sample_steps |= set(range(0, n_nominal + 1, sample_every))
    sample_steps = sorted(sample_steps)
    atol = 1e-2 * config.rtol
    max_step = 1.0 / schedule.omega_d
    n_eval = 0
    for start, stop, steps in ((0, half, [k for k in sample_steps if k < half]),
                               (half, n_nominal, [k for k in sample_steps if k >= half])):
        t0, t1 = start * dt, (T if stop == n_nominal else stop * dt)
        if start == half and perm is not None:
            c = rotate(t0, rotate(t0, c, -1)[perm], 1)
        times = sorted({*(min(k * dt, t1) for k in steps), t1})
        sol = solve_ivp(rhs, (t0, t1), c.ravel(), method="DOP853", t_eval=times,
                        rtol=config.rtol, atol=atol, max_step=max_step)
        if not sol.success:
            raise StepSizeError(f"adaptive integration failed: {sol.message}")
        n_eval += sol.nfev
        if on_sample is not None:
            for t, y in zip(sol.t, sol.y.T):
                if t < t1 or stop == n_nominal:
                    on_sample(float(t), rotate(t, y.reshape(shape), -1))
        c = sol.y[:, -1].reshape(shape)
    return rotate(T, c, -1), n_eval


def _check_norms(initial, final) -> float:
    drift = float(np.max(np.abs(np.sum(np.abs(final) ** 2, axis=0) - np.sum(np.abs(initial) ** 2, axis=0))))
    if drift > NORM_TOL:
        raise StepSizeError(
            f"norm drift {drift:.2e} exceeds {NORM_TOL:.0e}; increase steps_per_carrier_period"
        )
    return drift


# ---------------------------------------------------------------- amplitudes


def _coherent_overlap(alpha: complex, psi: np.ndarray) -> complex:
    """<alpha|psi> for a Fock-basis vector psi."""
    n = np.arange(psi.size)
    coeff = np.ones(psi.size, dtype=complex)
    if psi.size > 1:
        coeff[1:] = np.cumprod(np.conj(alpha) / np.sqrt(n[1:]))
    return np.exp(-0.5 * abs(alpha) ** 2) * (coeff @ psi)


def fit_coherent_state(psi: np.ndarray) -> complex:
    """argmax_alpha |<alpha|psi>|^2, seeded at <a> and refined by simplex search."""
    norm = np.linalg.norm(psi)
    if norm**2 < MIN_POPULATION:
        raise AmplitudeError("oscillator population below 1e-6; amplitude undefined")
    psi = psi / norm
    seed = np.sum(np.sqrt(np.arange(1, psi.size)) * np.conj(psi[:-1]) * psi[1:])
    res = minimize(
        lambda x: -abs(_coherent_overlap(x[0] + 1j * x[1], psi)) ** 2,
        [seed.real, seed.imag],
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-15, "maxfev": 4000},
    )
    return complex(res.x[0] + 1j * res.x[1])


def coherent_amplitude(state: np.ndarray, spec: CoupledSpectrum, branch: int) -> complex:
    """Best-fit coherent amplitude of the oscillator conditioned on ``branch``."""
    k, nmax = spec.dims
    if not 0 <= branch < k:
        raise ValidationError(f"branch {branch} outside the kept levels")
    psi = np.asarray(state)[branch * nmax:(branch + 1) * nmax]
    return fit_coherent_state(psi)


def _occupied_branch(col: np.ndarray, nmax: int) -> int:
    return int(np.argmax([np.sum(np.abs(col[b * nmax:(b + 1) * nmax]) ** 2) for b in (0, 1)]))


# ---------------------------------------------------------------- propagation


def _propagate_block(spec, schedule, columns, config, op, tracked):
    k, nmax = spec.dims
    energies = spec.flat_energies
    w_ref = 2.0 * np.pi * reference_energies(spec)  # c_ref = exp(i w_ref t) c_S
    perm = echo_permutation(k, nmax) if schedule.pulse.echo else None
    edge = np.arange(k) * nmax + (nmax - 1)
    trajectory = []
    stride = config.record_stride

    def on_sample(t, cols):
        pop = np.sum(np.abs(cols[edge]) ** 2, axis=0)
        if np.max(pop) > FOCK_EDGE_TOL:
            raise CutoffError(
                f"Fock-boundary population {np.max(pop):.2e} at t={t:.2f} ns; raise fock_cutoff"
            )
        if stride and tracked:
            ref = np.exp(1j * w_ref * t)[:, None] * cols
            amps = [complex("nan"), complex("nan")]
            live = [j for j in tracked if j is not None]
            for j in live:
                col = ref[:, j]
                amps[_occupied_branch(col, nmax)] = fit_coherent_state(col[_branch_slice(col, nmax)])
            leak = float(np.mean(np.sum(np.abs(cols[2 * nmax:, live]) ** 2, axis=0))) if k > 2 else 0.0
            trajectory.append((t, amps[0], amps[1], leak))

    final, n_steps = _integrate(energies, op, schedule, config, columns, perm, on_sample, stride)
    T = schedule.pulse.gate_time_t
    final = np.exp(1j * w_ref * T)[:, None] * final
    return final, trajectory, n_steps


def _branch_slice(col: np.ndarray, nmax: int) -> slice:
    b = _occupied_branch(col, nmax)
    return slice(b * nmax, (b + 1) * nmax)


def _tracked_columns(spec: CoupledSpectrum, columns: np.ndarray) -> list:
    out = []
    for k in (0, 1):
        target = spec.index(k, 0)
        match = None
        for j in range(columns.shape[1]):
            col = columns[:, j]
            if abs(abs(col[target]) - 1.0) < 1e-12:
                match = j
                break
        out.append(match)
    return out if any(m is not None for m in out) else []


def propagate(
    spec: CoupledSpectrum,
    schedule: DriveSchedule,
    initial_columns: np.ndarray,
    config: PropagationConfig = PropagationConfig(),
    drive_operator: np.ndarray | None = None,
    jobs: int = 1,
) -> GateReport:
    """Propagate dressed-basis columns through the echoed gate.

    ``drive_operator`` overrides the dressed V (used for filtered drives). With
    ``jobs > 1`` column blocks run in separate processes. Trajectory rows are
    recorded only for the columns that start in |0, 0> or |1, 0>.
    """
    cols = np.asarray(initial_columns, dtype=complex)
    if cols.ndim == 1:
        cols = cols[:, None]
    if cols.shape[0] != spec.dim:
        raise ValidationError(f"columns have dimension {cols.shape[0]}, expected {spec.dim}")
    norms = np.linalg.norm(cols, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValidationError("initial columns must be normalized")
    op = dressed_drive_operator(spec, schedule.c_sd) if drive_operator is None else drive_operator
    tracked = _tracked_columns(spec, cols)

    if jobs > 1 and cols.shape[1] > 1:
        blocks = np.array_split(np.arange(cols.shape[1]), min(jobs, cols.shape[1]))
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            futures = [pool.submit(_propagate_block, spec, schedule, cols[:, b], config, op, []) for b in blocks]
            parts = [f.result() for f in futures]
        final = np.concatenate([p[0] for p in parts], axis=1)
        n_steps = parts[0][2]
        trajectory = []
        if tracked and config.record_stride:
            picked = cols[:, [j for j in tracked if j is not None]]
            sub_tracked = _tracked_columns(spec, picked)
            trajectory = _propagate_block(spec, schedule, picked, config, op, sub_tracked)[1]
    else:
        final, trajectory, n_steps = _propagate_block(spec, schedule, cols, config, op, tracked)

    drift = _check_norms(cols, final)
    k, nmax = spec.dims
    leak = float(np.mean(np.sum(np.abs(final[2 * nmax:]) ** 2, axis=0))) if k > 2 else 0.0
    return GateReport(
        final_columns=final,
        trajectory=trajectory,
        leakage=leak,
        calibrated_t=schedule.pulse.gate_time_t,
        n_steps=n_steps,
        norm_drift=drift,
    )


def fluxonium_leakage(
    model: FluxoniumModel, schedule: DriveSchedule, config: PropagationConfig = PropagationConfig()
) -> float:
    """Mean final population outside {0, 1} for the decoupled, driven fluxonium."""
    k = model.levels_kept
    if schedule.pulse.amplitude_a == 0 or k <= 2:
        return 0.0
    perm = None
    if schedule.pulse.echo:
        perm = np.arange(k)
        perm[0], perm[1] = 1, 0
    cols = np.eye(k, 2, dtype=complex)
    final, _ = _integrate(model.energies, model.phi_elems, schedule, config, cols, perm)
    _check_norms(cols, final)
    return float(np.mean(np.sum(np.abs(final[2:]) ** 2, axis=0)))


# ---------------------------------------------------------------- calibration


def displacement_length(
    spec: CoupledSpectrum,
    schedule: DriveSchedule,
    config: PropagationConfig = PropagationConfig(),
    drive_operator: np.ndarray | None = None,
) -> tuple[float, complex]:
    """|alpha_a - alpha_b| and the separation vector for inputs |0,0>, |1,0>.

    Each amplitude is read on the branch its run ends in; for an ideal ECD_alpha
    the separation is alpha.
    """
    cols = basis_columns(spec, [(0, 0), (1, 0)])
    report = propagate(spec, schedule, cols, replace(config, record_stride=0), drive_operator)
    nmax = spec.dims[1]
    amps = []
    for j in range(2):
        col = report.final_columns[:, j]
        amps.append(fit_coherent_state(col[_branch_slice(col, nmax)]))
    # ECD convention: input 0 ends at +alpha/2, input 1 at -alpha/2
    sep = amps[0] - amps[1]
    return abs(sep), sep


def _secant(fun, target, x0, first, tol, max_iter, name):
    """Proportional first step from (x0, first), then secant updates."""
    history = []
    y0 = first - target
    history.append((x0, y0 + target))
    if abs(y0) <= tol * target:
        return x0, history
    x1 = x0 * target / first if first > 0 else 2.0 * x0
    y1 = fun(x1) - target
    history.append((x1, y1 + target))
    for _ in range(max_iter - 2):
        if abs(y1) <= tol * target:
            return x1, history
        if y1 == y0:
            break
        x2 = x1 - y1 * (x1 - x0) / (y1 - y0)
        if not np.isfinite(x2) or x2 <= 0:
            x2 = 0.5 * x1
        x0, y0 = x1, y1
        x1 = x2
        y1 = fun(x1) - target
        history.append((x1, y1 + target))
    if abs(y1) <= tol * target:
        return x1, history
    lines = ", ".join(f"{x:.4g}->{y:.4g}" for x, y in history)
    raise CalibrationError(f"{name} calibration did not reach {target} within {tol:.1%}: {lines}")


def linear_estimate_time(target_length: float, amplitude_a: float, r_cd: float, mean_envelope: float = 0.5) -> float:
    """T with (1/2) (2 pi A) |r_CD| <|Omega|> T = L."""
    return target_length / (0.5 * 2.0 * np.pi * amplitude_a * abs(r_cd) * mean_envelope)


def _rate_guess(spec: CoupledSpectrum) -> float:
    return cd_rate(spec.model, spec.osc.omega_osc, spec.g)


def calibrate_gate_time(
    target_length: float,
    schedule: DriveSchedule,
    spec: CoupledSpectrum,
    config: PropagationConfig = PropagationConfig(),
    t_guess: float | None = None,
    drive_operator: np.ndarray | None = None,
    tol: float = 0.005,
    max_iter: int = 12,
) -> float:
    """Gate time (ns) at fixed A whose displacement length matches the target."""
    if target_length <= 0:
        raise ValidationError("target_length must be positive")
    if schedule.pulse.amplitude_a <= 0:
        raise ValidationError("calibration needs a nonzero amplitude")
    if t_guess is None:
        t_guess = linear_estimate_time(target_length, schedule.pulse.amplitude_a, _rate_guess(spec))

    def length(T):
        return displacement_length(spec, schedule.with_pulse(gate_time_t=float(T)), config, drive_operator)[0]

    t_best, _ = _secant(length, target_length, t_guess, length(t_guess), tol, max_iter, "gate-time")
    return float(t_best)


def calibrate_amplitude(
    target_length: float,
    schedule: DriveSchedule,
    spec: CoupledSpectrum,
    config: PropagationConfig = PropagationConfig(),
    a_guess: float | None = None,
    drive_operator: np.ndarray | None = None,
    tol: float = 0.005,
    max_iter: int = 12,
) -> float:
    """Amplitude A (GHz) at fixed T whose displacement length matches the target."""
    if target_length <= 0:
        raise ValidationError("target_length must be positive")
    if a_guess is None:
        a_guess = linear_estimate_time(target_length, 1.0, _rate_guess(spec)) / schedule.pulse.gate_time_t

    def length(A):
        return displacement_length(spec, schedule.with_pulse(amplitude_a=float(A)), config, drive_operator)[0]

    a_best, _ = _secant(length, target_length, a_guess, length(a_guess), tol, max_iter, "amplitude")
    return float(a_best)
