import math

import numpy as np
import pytest

from conftest import stub_model
from fluxcd import F1, F2, F3, F4, build_fluxonium
from fluxcd.design import (
    BOUND_CAP,
    DOMINANCE_THRESHOLD,
    SelectionConstraints,
    activating_transition,
    evaluate_point,
    frequency_grid,
    max_coupling,
    max_drive,
    min_gate_time,
    rate_mismatch,
    scan_frequencies,
)
from fluxcd.errors import NumericalError, ValidationError
from fluxcd.rates import cd_transition_fractions


def test_coupling_bound_formula_and_linearity(f1_model):
    m = f1_model
    g = max_coupling(m, 1, 6, 5.03)
    expected = 0.1 * abs(m.energies[6] - m.energies[1] - 5.03) / (math.sqrt(10) * abs(m.n_elems[6, 1]))
    assert g == pytest.approx(expected, rel=1e-12)
    assert max_coupling(m, 1, 6, 5.03, SelectionConstraints(c_g=0.2)) == pytest.approx(2 * g, rel=1e-12)


def test_drive_bound_formula_and_linearity(f1_model):
    m = f1_model
    d16 = m.energies[6] - m.energies[1]
    assert max_drive(m, 1, 6, 5.03, SelectionConstraints(c_a=0.0)) == 0.0
    a1 = max_drive(m, 1, 6, d16 - 0.05)
    a2 = max_drive(m, 1, 6, d16 - 0.10)
    assert a2 == pytest.approx(2 * a1, rel=1e-12)
    assert a1 == pytest.approx(0.05 / abs(m.phi_elems[6, 1]), rel=1e-12)


def test_vanishing_elements_cap_and_warn(f1_model):
    with pytest.warns(UserWarning):
        assert max_coupling(f1_model, 0, 6, 5.03) == BOUND_CAP
    with pytest.warns(UserWarning):
        assert max_drive(f1_model, 0, 6, 5.03) == BOUND_CAP


def test_min_gate_time():
    t = min_gate_time(1.6, 1.0, 2e-3)
    assert t == pytest.approx(4 * 1.6 / (2 * np.pi * 1.0 * 2e-3), rel=1e-12)
    assert min_gate_time(1.6, 0.5, 2e-3) == pytest.approx(2 * t, rel=1e-12)
    assert min_gate_time(0.0, 1.0, 2e-3) == 0.0
    with pytest.raises(NumericalError):
        min_gate_time(1.6, 1.0, 0.0)
    with pytest.raises(ValidationError):
        min_gate_time(1.6, 1.0, 1e-3, envelope="square")


def test_constraints_validation():
    with pytest.raises(ValidationError):
        SelectionConstraints(c_r=-0.1)


def test_activating_transition_is_the_allowed_pole(f1_model_wide):
    assert activating_transition(f1_model_wide, 5.03) == (1, 6)


def test_accepted_points_reverify(f1_model_wide):
    c = SelectionConstraints()
    points = scan_frequencies(f1_model_wide, frequency_grid(4.95, 5.30, 0.001), c)
    assert points
    for p in points:
        mu, i = p.transition
        assert rate_mismatch(f1_model_wide, mu, i, p.omega_osc) <= c.c_r
        assert cd_transition_fractions(f1_model_wide, p.omega_osc)[(mu, i)] > DOMINANCE_THRESHOLD
    # deterministic
    again = scan_frequencies(f1_model_wide, frequency_grid(4.95, 5.30, 0.001), c)
    assert [p.as_row() for p in again] == [p.as_row() for p in points]


def test_pole_neighbourhood_rejected(f1_model_wide):
    d16 = f1_model_wide.energies[6] - f1_model_wide.energies[1]
    grid = d16 + np.array([-8e-4, -3e-4, 3e-4, 8e-4])
    assert scan_frequencies(f1_model_wide, grid) == []
    # r_i -> -r_mu at the pole, so the ratio tends to 2 |r_mu| / |r_CD| -> 2
    with pytest.warns(UserWarning):
        assert rate_mismatch(f1_model_wide, 1, 6, d16 - 1e-6) == pytest.approx(2.0, abs=0.02)


def test_tight_constraints_give_empty_window(f1_model_wide):
    tight = SelectionConstraints(c_r=0.002, c_g=0.001, c_a=0.01)
    assert scan_frequencies(f1_model_wide, frequency_grid(4.95, 5.30, 0.002), tight) == []


def test_two_level_stub_dominance_is_one():
    m = stub_model([0.0, 0.01, 5.2], [[0, 0, 0], [0, 0, 0.5], [0, 0.5, 0]],
                   [[0, 0, 0], [0, 0, 0.4], [0, -0.4, 0]])
    for w in (4.8, 5.0, 5.6):
        point, _ = evaluate_point(m, w)
        assert point.transition == (1, 2)
        assert point.dominance == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec, omega", [(F1, 5.03), (F2, 4.86), (F3, 6.89), (F4, 6.0)])
def test_paper_frequencies_accepted(spec, omega):
    model = build_fluxonium(spec, basis_dim=160, levels_kept=24)
    grid = frequency_grid(omega - 0.3, omega + 0.3, 0.001)
    accepted = [round(p.omega_osc, 6) for p in scan_frequencies(model, grid)]
    assert round(omega, 6) in accepted
