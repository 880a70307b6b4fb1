import numpy as np
import pytest
from scipy.integrate import quad

from fluxcd import F1, F4, OscillatorSpec, build_coupled, build_fluxonium
from fluxcd.coupled import dressed_oscillator_frequency
from fluxcd.drive import (
    DriveSchedule,
    PulseSpec,
    build_drive_operators,
    drive_frequency,
    envelope,
    envelope_mean,
    flux_modulation_amplitude,
    sd_coefficient,
)
from fluxcd.errors import ValidationError
from fluxcd.evolve import linear_estimate_time
from fluxcd.rates import cd_rate, perturbative_rate


def test_envelope_peak_and_echo_flip():
    spec = PulseSpec(1.0, 200.0)
    assert envelope(50.0, spec) == pytest.approx(1.0, abs=1e-15)
    assert envelope(150.0, spec) == pytest.approx(-1.0, abs=1e-15)
    for t in (0.0, 100.0, 200.0):
        assert abs(envelope(t, spec)) < 1e-15


def test_envelope_abs_integral_is_half_gate():
    spec = PulseSpec(1.0, 300.0)
    value, _ = quad(lambda t: abs(envelope(t, spec)), 0, 300.0, points=[150.0], epsabs=1e-13, epsrel=1e-13)
    assert value == pytest.approx(150.0, rel=1e-9)
    assert envelope_mean(spec) == 0.5


def test_envelope_antisymmetric_about_echo():
    spec = PulseSpec(1.0, 250.0)
    s = np.linspace(0.0, 125.0, 101)
    assert np.allclose(envelope(125.0 + s, spec), -envelope(125.0 - s, spec), atol=1e-14)
    assert np.max(np.abs(envelope(np.linspace(0, 250, 1001), spec))) <= 1.0


def test_envelope_out_of_range():
    spec = PulseSpec(1.0, 100.0)
    with pytest.raises(ValidationError):
        envelope(-1.0, spec)
    with pytest.raises(ValidationError):
        envelope(100.5, spec)


def test_no_echo_envelope_is_positive():
    spec = PulseSpec(1.0, 100.0, echo=False)
    assert envelope(75.0, spec) == pytest.approx(1.0)


def test_gaussian_envelope_unit_peak_zero_ends():
    spec = PulseSpec(1.0, 100.0, "gaussian")
    assert envelope(25.0, spec) == pytest.approx(1.0)
    assert envelope(75.0, spec) == pytest.approx(-1.0)
    assert abs(envelope(0.0, spec)) < 1e-14 and abs(envelope(50.0, spec)) < 1e-14
    assert 0.3 < envelope_mean(spec) < 0.5


@pytest.mark.parametrize("kwargs", [dict(amplitude_a=-0.1, gate_time_t=10), dict(amplitude_a=0.1, gate_time_t=0),
                                    dict(amplitude_a=0.1, gate_time_t=10, envelope_kind="square")])
def test_pulse_validation(kwargs):
    with pytest.raises(ValidationError):
        PulseSpec(**kwargs)


def test_sd_coefficient_definition():
    assert sd_coefficient((0.3, 0.0), 1) == 0.0
    assert sd_coefficient((0.3, -0.2), 1) == 0.2
    assert sd_coefficient((0.3, -0.2), 0) == -0.3
    with pytest.raises(ValidationError):
        sd_coefficient((0.3, -0.2), 2)


def test_sd_coefficient_f1_uses_branch_rate(f1_model):
    r0, r1 = (perturbative_rate(f1_model, k, 5.03, 0.0159).total for k in (0, 1))
    assert sd_coefficient((r0, r1), 1) == -r1


def test_schedule_tone_ratio_is_c_sd():
    sched = DriveSchedule(PulseSpec(0.4, 80.0), 5.0, -0.0123)
    t = np.linspace(0.0, 80.0, 997)
    flux = sched.flux_tone(t)
    sd = sched.sd_tone(t)
    nz = np.abs(flux) > 1e-9
    assert np.all(sd[nz] / flux[nz] == pytest.approx(-0.0123, rel=1e-14))
    assert sched.echo_time == 40.0 and sched.active_branch == 0


def test_schedule_record_round_trip():
    sched = DriveSchedule(PulseSpec(0.4, 80.0, "gaussian"), 5.0, -0.0123, 0, 0.7)
    rec = sched.to_record()
    assert set(rec) >= {"A", "T", "envelope", "omega_d", "c_sd", "mu", "carrier_phase"}
    assert DriveSchedule.from_record(rec) == sched


def test_drive_frequency_is_dressed_frequency(f1_model):
    spec0 = build_coupled(build_fluxonium(F1, levels_kept=4), OscillatorSpec(5.03, 4), 0.0)
    assert drive_frequency(spec0, 0) == pytest.approx(5.03, abs=1e-12)
    spec = build_coupled(f1_model, OscillatorSpec(5.03, 6), 0.0159)
    w0, w1 = drive_frequency(spec, 0), drive_frequency(spec, 1)
    assert w0 == dressed_oscillator_frequency(spec, 0)
    assert abs(w0 - 5.03) < 1e-3
    assert w0 != w1


def test_flux_modulation_zero_and_formula():
    assert flux_modulation_amplitude(0.0, 1.0) == 0.0
    assert flux_modulation_amplitude(2 * np.pi, 2.0) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        flux_modulation_amplitude(1.0, 0.0)


def _flux_at_800ns(spec, omega, g):
    model = build_fluxonium(spec, basis_dim=120, levels_kept=12)
    amp = linear_estimate_time(1.6, 1.0, cd_rate(model, omega, g)) / 800.0
    return flux_modulation_amplitude(amp, spec.e_l)


def test_flux_modulation_f1_at_800ns():
    assert _flux_at_800ns(F1, 5.03, 0.0159) == pytest.approx(0.57, rel=0.2)


def test_flux_modulation_f4_at_800ns():
    assert _flux_at_800ns(F4, 6.0, 0.0208) == pytest.approx(0.033, rel=0.2)


def test_drive_operators(f1_model):
    flux, quad_op = build_drive_operators(build_fluxonium(F1, levels_kept=3), OscillatorSpec(5.0, 3))
    for op in (flux, quad_op):
        assert np.allclose(op, op.conj().T, atol=1e-12)
    expected = np.array([[0, 1, 0], [1, 0, np.sqrt(2)], [0, np.sqrt(2), 0]])
    assert np.allclose(quad_op[:3, :3], expected)
    phi = flux[::3, ::3].real
    assert np.allclose(phi, phi.T)
