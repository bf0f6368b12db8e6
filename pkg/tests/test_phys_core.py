import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from optocollapse import constants
from optocollapse.phys_core import (
    EPSILON_MAX,
    PulsedRegimeError,
    SystemParams,
    branch_amplitude,
    coupling_g0,
    kappa_from_finesse,
    load_preset,
    measurement_phase_offset,
    position_spread,
    pulsed_regime_epsilon,
    pulsed_regime_valid,
    zero_point_spread,
)

HBAR = 1.054571817e-34


def test_constants_are_codata_2018():
    c = constants.CODATA2018
    assert c.hbar == 1.054571817e-34
    assert c.G == 6.67430e-11
    assert c.c == 299792458.0
    assert c.k_B == 1.380649e-23
    assert c.amu == 1.66053906660e-27
    with pytest.raises(Exception):
        c.hbar = 1.0


def test_zero_point_spread_values():
    x0 = zero_point_spread(6e-11, 2 * math.pi * 2e4)
    assert x0 == pytest.approx(2.6444921e-15, rel=1e-6)
    assert HBAR / (2 * 6e-11 * 2 * math.pi * 2e4 * x0**2) == pytest.approx(1.0, rel=1e-14)
    assert zero_point_spread(1.0, 1.0) == pytest.approx(7.2615e-18, rel=1e-4)
    assert zero_point_spread(4.0, 3.0) == pytest.approx(zero_point_spread(1.0, 3.0) / 2, rel=1e-15)


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
def test_zero_point_spread_domain(bad):
    with pytest.raises(ValueError):
        zero_point_spread(*bad)


def test_coupling_g0():
    g0 = coupling_g0(1.19e15, 5e-3, 6e-11, 2 * math.pi * 2e4)
    assert g0 == pytest.approx(2 * math.pi * 100, rel=2e-3)
    assert coupling_g0(2.0, 1.0, 1.0, 1.0) == pytest.approx(2 * coupling_g0(1.0, 1.0, 1.0, 1.0))
    assert coupling_g0(1.0, 1.0, 1.0, 1.0) / coupling_g0(1.0, 2.0, 1.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        coupling_g0(1.0, 0.0, 1.0, 1.0)


def test_kappa_convention():
    k = kappa_from_finesse(5e-3, 1.5e5)
    assert k == pytest.approx(6.2788e5, rel=1e-4)
    assert math.log(2) / k == pytest.approx(1.1e-6, rel=0.01)
    assert kappa_from_finesse(5e-3, 3e5) == pytest.approx(k / 2)


def test_position_spread():
    x0 = 2.6e-15
    assert position_spread(0.0, 1.0, 0.1, x0) == x0
    g0tau = 6.91e-4
    assert position_spread(math.sqrt(8.6e6), g0tau, 1.0, x0) / x0 == pytest.approx(3.0, rel=0.02)
    assert position_spread(1 / (4 * 0.1), 0.1, 1.0, x0) == pytest.approx(x0 * math.sqrt(9 / 8))
    with pytest.raises(PulsedRegimeError):
        position_spread(1.0, 0.5, 1.0, x0)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(1e-4, 0.49))
def test_position_spread_monotone(a1, a2, g):
    lo, hi = sorted((a1, a2))
    assert position_spread(lo, g, 1.0, 1.0) <= position_spread(hi, g, 1.0, 1.0)
    assert position_spread(hi, g / 2, 1.0, 1.0) <= position_spread(hi, g, 1.0, 1.0)


def test_branch_amplitude_examples():
    g0, wm, tau = 1000.0, 2 * math.pi * 2e4, 1e-6
    assert branch_amplitude(3, g0, wm, tau, 0.0) == pytest.approx(3j * g0 * tau)
    assert branch_amplitude(3, g0, wm, tau, math.pi / (2 * wm)) == pytest.approx(3 * g0 * tau)
    exact = branch_amplitude(1, g0, wm, tau, 0.0, exact=True)
    pulsed = branch_amplitude(1, g0, wm, tau, 0.0)
    offset = cmath.phase(pulsed) - cmath.phase(exact)
    assert offset == pytest.approx(measurement_phase_offset(wm, tau), rel=1e-6)


@given(st.integers(0, 50), st.floats(0, 1e-3), st.booleans(),
       st.floats(1e-3, 0.1), st.floats(0.1, 10.0))
def test_branch_amplitude_properties(n, t, exact, wmtau, g0tau):
    wm = 1e5
    tau = wmtau / wm
    g0 = g0tau / tau
    a = branch_amplitude(n, g0, wm, tau, t, exact=exact)
    a0 = branch_amplitude(n, g0, wm, tau, 0.0, exact=exact)
    assert abs(a) == pytest.approx(abs(a0), rel=1e-12, abs=1e-300)
    if n == 0:
        assert a == 0
    p = branch_amplitude(n, g0, wm, tau, t)
    e = branch_amplitude(n, g0, wm, tau, t, exact=True)
    if n:
        assert abs(e - p) / abs(p) <= wmtau


def test_pulsed_regime_epsilon():
    g0tau, wmtau = 6.91e-4, 0.138
    a_sq = 0.6 / (g0tau**2 * wmtau)
    tau = 1.1e-6
    eps = pulsed_regime_epsilon(math.sqrt(a_sq), g0tau / tau, tau, wmtau / tau)
    assert eps == pytest.approx(0.1, rel=1e-12)
    assert pulsed_regime_valid(math.sqrt(a_sq), g0tau / tau, tau, wmtau / tau)
    assert pulsed_regime_epsilon(0.0, 1.0, 1.0, 1.0) == 0.0
    assert EPSILON_MAX**2 == pytest.approx(0.01)
    assert not pulsed_regime_valid(2 * math.sqrt(a_sq), g0tau / tau, tau, wmtau / tau)


def test_system_params_validation():
    with pytest.raises(ValueError):
        SystemParams(0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        SystemParams(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, alpha=-1.0)
    p = SystemParams(1.0, 1.0, 1.0, 1.0, 1.0, 2.0)
    with pytest.raises(PulsedRegimeError):
        p.check_pulsed()


def test_from_dimensionless_roundtrip():
    p = SystemParams.from_dimensionless(0.1, 0.05, alpha=3.0, n_th=0.5)
    assert p.g0tau == pytest.approx(0.1, rel=1e-14)
    assert p.omega_m_tau == pytest.approx(0.05, rel=1e-14)
    assert p.alpha == 3.0 and p.n_th == 0.5


def test_load_preset(trampoline):
    p = load_preset("trampoline-60ng")
    assert p == trampoline
    assert p.g0 == pytest.approx(2 * math.pi * 100, rel=1e-12)
    assert p.omega_c == pytest.approx(1.19e15, rel=2e-3)
    assert p.tau == pytest.approx(1.1e-6, rel=0.01)
