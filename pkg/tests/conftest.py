import numpy as np
import pytest

from fluxcd import F1, F4, OscillatorSpec, build_coupled, build_fluxonium
from fluxcd.fluxonium import FluxoniumModel, FluxoniumSpec


def stub_model(energies, phi, n_imag) -> FluxoniumModel:
    """FluxoniumModel with hand-chosen spectrum and matrix elements."""
    energies = np.asarray(energies, dtype=float)
    k = energies.size
    return FluxoniumModel(
        spec=FluxoniumSpec(1.0, 1.0, 1.0),
        levels_kept=k,
        basis_dim=4 * k,
        energies=energies,
        phi_elems=np.asarray(phi, dtype=float),
        n_elems=np.asarray(n_imag, dtype=float),
        eigvecs=np.eye(4 * k, k),
    )


@pytest.fixture(scope="session")
def f1_model():
    return build_fluxonium(F1, basis_dim=120, levels_kept=12)


@pytest.fixture(scope="session")
def f1_model_wide():
    return build_fluxonium(F1, basis_dim=160, levels_kept=24)


@pytest.fixture(scope="session")
def f4_model():
    return build_fluxonium(F4, basis_dim=120, levels_kept=12)


@pytest.fixture(scope="session")
def small_spec():
    """F4 with K=4, N=8: the small instance used for integrator checks."""
    model = build_fluxonium(F4, basis_dim=120, levels_kept=4)
    return build_coupled(model, OscillatorSpec(6.0, 8), 0.05)


# criterion number -> list of (passed, detail) from tests/test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 10):
        items = ACCEPTANCE.get(k)
        if not items:
            terminalreporter.write_line(f"CRITERION {k}: NOT RUN")
            continue
        status = "PASS" if all(ok for ok, _ in items) else "FAIL"
        detail = "; ".join(("" if ok else "FAILED ") + text for ok, text in items)
        terminalreporter.write_line(f"CRITERION {k}: {status} | {detail}")
