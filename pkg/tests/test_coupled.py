import numpy as np
import pytest

from conftest import stub_model
from fluxcd import (
    F1,
    HybridizationError,
    OscillatorSpec,
    build_coupled,
    build_fluxonium,
    dispersive_shift,
    dressed_oscillator_frequency,
    self_kerr,
)
from fluxcd.coupled import coupled_hamiltonian


def test_uncoupled_limit(f4_model):
    osc = OscillatorSpec(6.0, 6)
    spec = build_coupled(f4_model, osc, 0.0)
    expected = f4_model.energies[:, None] + 6.0 * np.arange(6)[None, :]
    assert np.allclose(spec.energies, expected, atol=1e-12)
    assert np.allclose(spec.u0, np.eye(spec.dim))
    assert dispersive_shift(spec) == 0.0
    assert abs(self_kerr(spec)) < 1e-12
    assert dressed_oscillator_frequency(spec, 1) == pytest.approx(6.0, abs=1e-12)


def test_two_level_two_fock_closed_form():
    # parity splits the 4x4 problem into {|0,0>,|1,1>} and {|0,1>,|1,0>}
    delta, omega, g, nu = 5.1, 5.0, 0.03, 0.7
    model = stub_model([0.0, delta], np.zeros((2, 2)), [[0.0, nu], [-nu, 0.0]])
    spec = build_coupled(model, OscillatorSpec(omega, 2), g)
    s_a = np.hypot(0.5 * (delta + omega), g * nu)
    s_b = np.hypot(0.5 * (delta - omega), g * nu)
    assert spec.energy(0, 0) == pytest.approx(0.5 * (delta + omega) - s_a, abs=1e-10)
    assert spec.energy(1, 1) == pytest.approx(0.5 * (delta + omega) + s_a, abs=1e-10)
    assert spec.energy(0, 1) == pytest.approx(0.5 * (delta + omega) - s_b, abs=1e-10)
    assert spec.energy(1, 0) == pytest.approx(0.5 * (delta + omega) + s_b, abs=1e-10)


def test_unitarity_and_diagonalization(small_spec):
    u0 = small_spec.u0
    assert np.abs(u0.T @ u0 - np.eye(small_spec.dim)).max() < 1e-9
    h = coupled_hamiltonian(small_spec.model, small_spec.osc, small_spec.g)
    d = small_spec.to_dressed(h)
    assert np.abs(d - np.diag(small_spec.flat_energies)).max() < 1e-9
    assert np.all(small_spec.overlap_quality > 0.5)


def test_operator_transform_round_trip(small_spec):
    rng = np.random.default_rng(3)
    op = rng.normal(size=(small_spec.dim, small_spec.dim))
    back = small_spec.to_dressed(small_spec.to_bare(op))
    assert np.abs(back - op).max() < 1e-9


def test_dispersive_shift_definition_and_scaling(f1_model_wide):
    osc = OscillatorSpec(5.03, 8)
    chis = [dispersive_shift(build_coupled(f1_model_wide, osc, g)) for g in (0.0025, 0.005)]
    assert chis[1] / chis[0] == pytest.approx(4.0, rel=0.05)
    spec = build_coupled(f1_model_wide, osc, 0.005)
    diff = dressed_oscillator_frequency(spec, 0) - dressed_oscillator_frequency(spec, 1)
    assert diff == pytest.approx(2.0 * dispersive_shift(spec), abs=1e-12)


def test_kerr_scales_as_g4(f4_model):
    osc = OscillatorSpec(6.0, 10)
    ks = [self_kerr(build_coupled(f4_model, osc, g)) for g in (0.01, 0.02)]
    assert ks[1] / ks[0] == pytest.approx(16.0, rel=0.1)


def test_dressed_frequency_near_bare_at_f1(f1_model_wide):
    g = 0.0159
    spec = build_coupled(f1_model_wide, OscillatorSpec(5.03, 8), g)
    m = f1_model_wide
    estimate = g**2 * m.n_elems[1, 6] ** 2 / (m.energies[6] - m.energies[1] - 5.03)
    shift = abs(dressed_oscillator_frequency(spec, 1) - 5.03)
    assert shift < 1e-3
    assert shift < 5 * abs(estimate)


def test_labels_continuous_under_small_g_change(f1_model_wide):
    osc = OscillatorSpec(5.03, 8)
    a = build_coupled(f1_model_wide, osc, 0.0159)
    b = build_coupled(f1_model_wide, osc, 0.0159 * 1.01)
    assert np.abs(a.energies - b.energies).max() < 1e-3
    assert np.all(np.abs(np.sum(a.u0 * b.u0, axis=0)) > 0.99)


def test_strong_hybridization_is_reported():
    # |0,1> couples equally to |1,0> and |2,0> at detunings +-d with g nu = d:
    # the eigenvectors give |0,1> weight 1/3 each, so no label exceeds 0.5
    d, omega = 0.05, 5.0
    n = np.zeros((3, 3))
    n[0, 1], n[0, 2] = 1.0, 1.0
    model = stub_model([0.0, omega + d, omega - d], np.zeros((3, 3)), n - n.T)
    with pytest.raises(HybridizationError) as info:
        build_coupled(model, OscillatorSpec(omega, 2), d)
    assert len(info.value.label) == 2
    assert info.value.overlap <= 0.5
