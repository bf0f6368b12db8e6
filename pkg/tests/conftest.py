import math

import pytest
from hypothesis import settings

from optocollapse.phys_core import SystemParams, zero_point_spread

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

M_TRAMP = 6e-11
OMEGA_M = 2 * math.pi * 2e4
L_TRAMP = 5e-3
F_TRAMP = 1.5e5
G0_TRAMP = 2 * math.pi * 100


@pytest.fixture
def trampoline():
    """The 60 ng trampoline with ``tau = ln 2 / kappa`` and the recommended drive."""
    from optocollapse.config import load_preset_config

    return load_preset_config("trampoline-60ng").system


@pytest.fixture
def desk_params():
    """Trampoline platform driven at desk scale (alpha = 10)."""
    x0 = zero_point_spread(M_TRAMP, OMEGA_M)
    omega_c = G0_TRAMP * L_TRAMP / x0
    kappa = math.pi * 299792458.0 / (2 * L_TRAMP * F_TRAMP)
    return SystemParams(M_TRAMP, OMEGA_M, L_TRAMP, omega_c, F_TRAMP, math.log(2) / kappa,
                        alpha=10.0)


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, passed, detail)`` for the acceptance summary."""
    def record(number, passed, detail=""):
        _CRITERIA[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
