import numpy as np
import pytest

from conftest import stub_model
from fluxcd import F1, F4, OscillatorSpec, build_coupled, build_fluxonium
from fluxcd.coupled import annihilation, dressed_oscillator_frequency
from fluxcd.drive import DriveSchedule, PulseSpec
from fluxcd.errors import AmplitudeError, CutoffError, StepSizeError, ValidationError
from fluxcd.evolve import (
    PropagationConfig,
    basis_columns,
    calibrate_gate_time,
    coherent_amplitude,
    displacement_length,
    echo_permutation,
    fit_coherent_state,
    fluxonium_leakage,
    linear_estimate_time,
    propagate,
)
from fluxcd.metrics import displacement, evaluate_gate
from fluxcd.rates import perturbative_rate

FINE = PropagationConfig(128)


def _schedule(spec, amp, T, darken=True):
    r1 = perturbative_rate(spec.model, 1, spec.osc.omega_osc, spec.g).total
    return DriveSchedule(PulseSpec(amp, T), dressed_oscillator_frequency(spec, 0), -r1 if darken else 0.0)


def _probe_columns(spec):
    return basis_columns(spec, [(0, 0), (1, 0), (0, 1), (1, 2), (2, 0)])


def test_echo_permutation_swaps_computational_branches():
    perm = echo_permutation(3, 2)
    assert perm.tolist() == [2, 3, 0, 1, 4, 5]


def test_zero_drive_is_echo_x():
    # weak coupling keeps the self-Kerr phase of the n_in inputs below 1e-5 rad
    spec = build_coupled(build_fluxonium(F4, basis_dim=120, levels_kept=4), OscillatorSpec(6.0, 8), 0.005)
    ev = evaluate_gate(spec, _schedule(spec, 0.0, 30.0), 0.0, n_in=4, config=PropagationConfig(24))
    assert ev.infidelity < 1e-8
    assert ev.report.leakage == 0.0


def test_echo_cancels_dispersive_phase(small_spec):
    report = propagate(small_spec, _schedule(small_spec, 0.0, 137.0),
                       basis_columns(small_spec, [(i, n) for i in (0, 1) for n in range(4)]))
    u = report.final_columns
    idx = small_spec.index

    def phase(start, n):
        end = 1 - start
        col = start * 4 + n
        ref = start * 4
        return np.angle(u[idx(end, n), col] / u[idx(end, 0), ref])

    assert abs(phase(0, 1)) < 1e-6 and abs(phase(1, 1)) < 1e-6
    for n in (1, 2, 3):
        assert abs(np.angle(np.exp(1j * (phase(0, n) - phase(1, n))))) < 1e-6


def test_norm_and_gram_conserved(small_spec):
    cols = basis_columns(small_spec, [(i, n) for i in (0, 1) for n in range(3)])
    report = propagate(small_spec, _schedule(small_spec, 0.3, 40.0), cols, FINE)
    gram = report.final_columns.conj().T @ report.final_columns
    assert report.norm_drift <= 1e-7
    assert np.max(np.abs(gram - np.eye(cols.shape[1]))) < 1e-6


def test_step_halving_self_convergence(small_spec):
    sched = _schedule(small_spec, 0.5, 20.0)
    cols = _probe_columns(small_spec)
    coarse = propagate(small_spec, sched, cols, PropagationConfig(256)).final_columns
    fine = propagate(small_spec, sched, cols, PropagationConfig(512)).final_columns
    overlap = np.abs(np.sum(coarse.conj() * fine, axis=0))
    assert np.max(np.abs(1.0 - overlap)) < 1e-8
    assert np.max(np.abs(coarse - fine)) < 1e-8


@pytest.mark.slow
def test_lab_and_interaction_frames_agree(small_spec):
    sched = _schedule(small_spec, 0.3, 10.0)
    cols = _probe_columns(small_spec)
    inter = propagate(small_spec, sched, cols, PropagationConfig(128)).final_columns
    lab = propagate(small_spec, sched, cols, PropagationConfig(2000, "lab")).final_columns
    assert np.max(np.abs(inter - lab)) < 1e-7


def test_trajectory_rows(small_spec):
    cols = basis_columns(small_spec, [(0, 0), (1, 0)])
    report = propagate(small_spec, _schedule(small_spec, 0.3, 40.0), cols, PropagationConfig(64, record_stride=500))
    t = [row[0] for row in report.trajectory]
    assert len(report.trajectory) > 10 and all(len(row) == 4 for row in report.trajectory)
    assert t[0] == 0.0 and t[-1] == pytest.approx(40.0)
    assert abs(report.trajectory[0][1]) < 1e-6 and abs(report.trajectory[0][2]) < 1e-6
    assert all(0.0 <= row[3] <= 1.0 for row in report.trajectory)
    assert report.trajectory[-1][3] == pytest.approx(report.leakage, rel=1e-9)


def test_columns_must_be_normalized(small_spec):
    with pytest.raises(ValidationError):
        propagate(small_spec, _schedule(small_spec, 0.3, 10.0), 2 * basis_columns(small_spec, [(0, 0)]))


def test_cutoff_error_for_large_displacement(small_spec):
    with pytest.raises(CutoffError):
        propagate(small_spec, _schedule(small_spec, 3.0, 40.0), basis_columns(small_spec, [(1, 0)]))


def test_step_size_error_for_coarse_steps():
    model = build_fluxonium(F1, basis_dim=120, levels_kept=8)
    with pytest.raises(StepSizeError):
        fluxonium_leakage(model, DriveSchedule(PulseSpec(1.5, 50.0), 5.03, 0.0), PropagationConfig(12))


def test_adaptive_integrator_matches_fixed_step(small_spec):
    sched = _schedule(small_spec, 0.3, 20.0)
    cols = _probe_columns(small_spec)
    fixed = propagate(small_spec, sched, cols, PropagationConfig(256, record_stride=100))
    adaptive = propagate(small_spec, sched, cols, PropagationConfig(256, record_stride=100, method="dop853"))
    assert np.max(np.abs(fixed.final_columns - adaptive.final_columns)) < 1e-8
    assert adaptive.norm_drift < 1e-8
    assert [row[0] for row in adaptive.trajectory] == pytest.approx([row[0] for row in fixed.trajectory])


def test_adaptive_integrator_rejects_bad_tolerance():
    with pytest.raises(ValidationError):
        PropagationConfig(method="dop853", rtol=0.1)
    with pytest.raises(ValidationError):
        PropagationConfig(method="euler")


# ---------------------------------------------------------------- amplitudes


def _coherent(beta, dim=30):
    vac = np.zeros(dim, dtype=complex)
    vac[0] = 1.0
    return displacement(beta, dim) @ vac


def test_coherent_state_recovered():
    assert abs(fit_coherent_state(_coherent(0.8)) - 0.8) < 1e-6
    assert abs(fit_coherent_state(_coherent(0.0))) < 1e-6


def _grid_argmax(psi, lo, hi, step):
    x = np.arange(lo[0], hi[0] + step / 2, step)
    y = np.arange(lo[1], hi[1] + step / 2, step)
    alpha = x[None, :] + 1j * y[:, None]
    # <alpha|psi> = exp(-|alpha|^2/2) sum_n psi_n conj(alpha)^n / sqrt(n!)
    coeff = psi / np.sqrt(np.cumprod(np.r_[1.0, np.arange(1, psi.size)]))
    poly = np.polynomial.polynomial.polyval(np.conj(alpha), coeff)
    overlap = np.abs(np.exp(-0.5 * np.abs(alpha) ** 2) * poly) ** 2
    k = np.unravel_index(np.argmax(overlap), overlap.shape)
    return alpha[k]


def test_coherent_amplitude_matches_grid_oracle():
    dim = 30
    n = np.arange(dim)
    psi = np.exp(-0.04j * n**2) * _coherent(0.9 + 0.3j, dim)
    coarse = _grid_argmax(psi, (-2.0, -2.0), (2.0, 2.0), 4e-3)
    fine = _grid_argmax(psi, (coarse.real - 4e-3, coarse.imag - 4e-3), (coarse.real + 4e-3, coarse.imag + 4e-3), 1e-4)
    fit = fit_coherent_state(psi)
    assert abs(fit - coarse) < 4e-3
    assert abs(fit - fine) < 1e-3


def test_coherent_amplitude_reads_branch(small_spec):
    state = np.zeros(small_spec.dim, dtype=complex)
    nmax = small_spec.dims[1]
    state[nmax:2 * nmax] = _coherent(0.5, nmax)
    assert abs(coherent_amplitude(state, small_spec, 1) - 0.5) < 1e-5
    with pytest.raises(AmplitudeError):
        coherent_amplitude(state, small_spec, 0)
    with pytest.raises(ValidationError):
        coherent_amplitude(state, small_spec, 7)


# ---------------------------------------------------------------- leakage


def test_fluxonium_leakage_zero_amplitude(f4_model):
    sched = DriveSchedule(PulseSpec(0.0, 50.0), 6.0, 0.0)
    assert fluxonium_leakage(f4_model, sched) == 0.0


def test_fluxonium_leakage_decreases_with_gate_time():
    model = build_fluxonium(F4, basis_dim=120, levels_kept=6)
    values = [fluxonium_leakage(model, DriveSchedule(PulseSpec(1.0, T), 6.0, 0.0), PropagationConfig(64))
              for T in (20.0, 40.0, 80.0, 160.0)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[0] > 0.0


# ---------------------------------------------------------------- calibration


def _linear_toy(rate=0.02, fock=14):
    model = stub_model([0.0, 0.5], np.zeros((2, 2)), np.zeros((2, 2)))
    spec = build_coupled(model, OscillatorSpec(5.0, fock), 0.0)
    a = annihilation(fock)
    op = np.kron(np.diag([0.0, rate]), a + a.T)
    return spec, op


def test_calibration_recovers_linear_toy_closed_form():
    rate, amp, length = 0.02, 0.5, 1.0
    spec, op = _linear_toy(rate)
    sched = DriveSchedule(PulseSpec(amp, 50.0), 5.0, 0.0)
    config = PropagationConfig(64)
    T = calibrate_gate_time(length, sched, spec, config, t_guess=50.0, drive_operator=op)
    closed = 4.0 * length / (2.0 * np.pi * amp * rate)
    assert T == pytest.approx(closed, rel=5e-3)
    assert linear_estimate_time(length, amp, rate) == pytest.approx(closed)
    got, _ = displacement_length(spec, sched.with_pulse(gate_time_t=T), config, op)
    assert got == pytest.approx(length, rel=5e-3)


def test_doubling_target_roughly_doubles_time(small_spec):
    sched = _schedule(small_spec, 0.3, 40.0)
    config = PropagationConfig(64)
    t1 = calibrate_gate_time(0.4, sched, small_spec, config)
    t2 = calibrate_gate_time(0.8, sched, small_spec, config)
    assert t2 / t1 == pytest.approx(2.0, rel=0.15)


def test_calibration_rejects_bad_targets(small_spec):
    sched = _schedule(small_spec, 0.3, 40.0)
    with pytest.raises(ValidationError):
        calibrate_gate_time(0.0, sched, small_spec)
    with pytest.raises(ValidationError):
        calibrate_gate_time(1.0, sched.with_pulse(amplitude_a=0.0), small_spec)
