import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optocollapse.decoherence import (
    DiosiPenrose,
    EllisQuadratic,
    PhaseKernel,
    Standard,
    Tabulated,
    quadrature_moments,
    xi,
)
from optocollapse.phys_core import PulsedRegimeError, SystemParams
from optocollapse.protocol_sim import (
    BLOCK_SIZE,
    MomentEstimate,
    PhaseSampler,
    ProtocolConfig,
    SamplerError,
    ShotRecord,
    build_phase_sampler,
    joint_witness_sampling,
    run_protocol,
)
from optocollapse.witness import DELTA_X_ENTANGLEMENT, WitnessInputs, witness_analytic

N6 = 10**6
DESK = SystemParams.from_dimensionless(0.1, 1e-3, alpha=10.0)
DP_DESK = DiosiPenrose.nuclear_spheres(DESK.M, 28, prefactor=8217.0)  # xi(1) ~ 0.6 at k = 1


def _kernel(model, k, params=DESK):
    return PhaseKernel(model, k, params.omega_m, params.g0tau, params.x0)


def _cf_gate(sampler, kernel, shots=N6, seed=0):
    phi = sampler.sample(shots, seed=seed)
    for eta in (1.0, 2.0, 3.0):
        emp = np.mean(np.exp(1j * eta * phi))
        assert abs(emp - xi(kernel, eta)) < 5 / math.sqrt(shots), eta


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(DESK, Standard(1.0), shots=0)
    with pytest.raises(ValueError):
        ProtocolConfig(DESK, Standard(1.0), k=-1)
    with pytest.raises(ValueError):
        ProtocolConfig(DESK, Standard(1.0), delta_x=-0.1)
    c = ProtocolConfig(DESK, Standard(1.0), k=3)
    assert c.sign_k == -1.0 and c.with_(k=4).sign_k == 1.0


def test_pulsed_regime_enforced():
    p = SystemParams.from_dimensionless(0.1, 0.5, alpha=20.0)
    with pytest.raises(PulsedRegimeError):
        run_protocol(ProtocolConfig(p, Standard(0.0), shots=10))


def test_sampler_k_zero_is_point():
    s = build_phase_sampler(_kernel(DP_DESK, 0))
    assert s.mode == "point"
    assert np.all(s.sample(1000, seed=4) == 0.0)


def test_standard_sampler_variance():
    lam = 1e26
    ker = _kernel(Standard(lam), 7)
    s = build_phase_sampler(ker)
    assert s.mode == "gauss"
    expect = 2 * (2 * math.pi * 7 * lam * (DESK.g0tau * DESK.x0) ** 2 / DESK.omega_m)
    est = MomentEstimate.from_samples(s.sample(N6, seed=1))
    assert abs(est.variance - expect) < 5 * est.std_error_var
    _cf_gate(s, ker)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_dp_sampler_characteristic(k):
    ker = _kernel(DP_DESK, k)
    s = build_phase_sampler(ker)
    assert s.mode == "table"
    # the smoothing window moves xi by at most (eta / W)^2 / 2
    np.testing.assert_allclose(s.characteristic([1.0, 2.0]), xi(ker, np.array([1.0, 2.0])),
                               atol=max(1e-5, 2.0 / s.window**2))
    _cf_gate(s, ker, seed=k)


def test_sampler_with_atom():
    # large separations saturate the rate so a finite share of shots keeps phi = 0
    dp = DiosiPenrose.nuclear_spheres(6e-11, 28)
    ker = PhaseKernel(dp, 1, DESK.omega_m, 0.4, 1e-12)
    dp = dp.with_prefactor(math.log(2) / (ker.elapsed * dp.saturation_rate()))
    ker = PhaseKernel(dp, 1, DESK.omega_m, 0.4, 1e-12)
    s = build_phase_sampler(ker)
    assert s.atom == pytest.approx(0.5, rel=1e-12)
    _cf_gate(s, ker, seed=7)


def test_tabulated_sampler():
    # saturating Gaussian profile, a valid (conditionally negative definite) rate
    x = np.linspace(0, 4e-14, 2001)
    tab = Tabulated(x, 3e9 * -np.expm1(-((x / 5e-15) ** 2)))
    ker = _kernel(tab, 2)
    _cf_gate(build_phase_sampler(ker), ker, seed=11)


def test_invalid_rate_profile_is_rejected():
    # gamma ~ x^4 is not a localisation rate: exp(-c eta^4) is no characteristic function
    x = np.linspace(0, 4e-14, 2001)
    with pytest.raises(SamplerError, match="negative"):
        build_phase_sampler(_kernel(Tabulated(x, 1e62 * x**4), 2))


def test_tabulated_too_short_is_rejected():
    tab = Tabulated([0.0, 1e-16, 2e-16], [0.0, 1e3, 4e3])
    with pytest.raises(SamplerError):
        build_phase_sampler(_kernel(tab, 1))


def test_sampler_deterministic_in_start():
    s = build_phase_sampler(_kernel(DP_DESK, 1))
    whole = s.sample(1000, seed=5)
    np.testing.assert_array_equal(whole[400:], s.sample(600, seed=5, start=400))


def test_perfect_feedback_restores_coherent_state():
    rec, est = run_protocol(ProtocolConfig(DESK, DP_DESK, k=0, shots=N6, seed=2))
    assert abs(est.variance - 0.5) < 5 * est.std_error_var
    assert np.all(rec.phi_deco == 0.0)


def test_standard_model_variance():
    lam = 1e34
    conf = ProtocolConfig(DESK, Standard(lam), k=4, shots=N6, seed=3)
    _, est = run_protocol(conf)
    expect = 0.5 + DESK.alpha**2 * (1 - xi(conf.kernel(), 2.0))
    assert 0.05 < 1 - xi(conf.kernel(), 2.0) < 0.9
    assert abs(est.variance - expect) < 5 * est.std_error_var


def test_position_accuracy_boundary_doubles_variance():
    dx = 1 / (2 * DESK.g0tau * DESK.alpha)
    _, est = run_protocol(ProtocolConfig(DESK, Standard(0.0), shots=N6, seed=4, delta_x=dx))
    assert abs(est.variance - 1.0) < 5 * est.std_error_var


def test_mean_at_theta_zero():
    conf = ProtocolConfig(DESK, DP_DESK, k=1, theta=0.0, shots=N6, seed=5)
    _, est = run_protocol(conf)
    mean, second = quadrature_moments(conf.kernel(), DESK.alpha, 0.0)
    assert abs(est.mean - mean) < 5 * est.std_error_mean
    assert abs(est.variance - (second - mean**2)) < 5 * est.std_error_var


def test_dp_protocol_matches_quadrature_moments():
    conf = ProtocolConfig(DESK, DP_DESK, k=1, theta=math.pi / 2, shots=N6, seed=6)
    _, est = run_protocol(conf)
    mean, second = quadrature_moments(conf.kernel(), DESK.alpha, conf.theta)
    assert abs(est.variance - (second - mean**2)) < 5 * est.std_error_var


@settings(max_examples=15)
@given(k=st.integers(0, 6), theta=st.floats(0, 2 * math.pi), dx=st.floats(0, 1),
       sig=st.floats(0, 0.2), n_th=st.floats(0, 3), seed=st.integers(0, 2**32))
def test_variance_floor(k, theta, dx, sig, n_th, seed):
    p = DESK.with_(n_th=n_th)
    _, est = run_protocol(ProtocolConfig(p, DP_DESK, k=k, theta=theta, shots=20000,
                                         seed=seed, delta_x=dx, sigma_lo=sig))
    assert est.variance > 0.5 - 5 * est.std_error_var


def test_determinism_across_workers():
    shots = 3 * BLOCK_SIZE + 123
    ref = None
    for w in (1, 4, 16):
        rec, est = run_protocol(ProtocolConfig(DESK, DP_DESK, k=1, shots=shots, seed=9,
                                               workers=w, delta_x=0.1, sigma_lo=0.01))
        cols = np.column_stack(list(rec.columns().values()))
        if ref is None:
            ref = (cols, est)
        else:
            assert cols.tobytes() == ref[0].tobytes()
            assert est == ref[1]


def test_records_interface():
    rec, _ = run_protocol(ProtocolConfig(DESK, Standard(1e25), k=1, shots=10, seed=1))
    assert len(rec) == 10
    r = rec[3]
    assert isinstance(r, ShotRecord)
    assert r.quadrature_outcome == rec.outcome[3]
    cols = rec.columns()
    assert list(cols) == ["phi_deco_rad", "x_meas_x0", "phi_feedback_rad", "outcome"]
    assert all(np.isfinite(c).all() for c in cols.values())


def test_moment_estimate():
    x = np.random.default_rng(0).normal(2.0, 3.0, N6)
    est = MomentEstimate.from_samples(x)
    assert est.shots == N6
    assert est.variance == pytest.approx(np.var(x, ddof=1), rel=1e-12)
    assert est.std_error_mean == pytest.approx(3 / 1e3, rel=0.01)
    assert est.std_error_var == pytest.approx(9 * math.sqrt(2) / 1e3, rel=0.02)


# ---------------------------------------------------------------- joint witness


def _witness_params(alpha_sq, **kw):
    return SystemParams.from_dimensionless(0.1, 1e-4, alpha=math.sqrt(alpha_sq), **kw)


def test_joint_witness_violation():
    p = _witness_params(25.0)
    rep = joint_witness_sampling(ProtocolConfig(p, Standard(0.0), shots=N6, seed=1))
    ref = witness_analytic(WitnessInputs(g0tau=0.1, alpha=5.0))
    assert rep.violated
    assert abs(rep.margin - ref.margin) < 5 * rep.std_errors["margin"]


def test_joint_witness_product_state():
    p = SystemParams.from_dimensionless(0.1, 1e-4, alpha=0.0)
    rep = joint_witness_sampling(ProtocolConfig(p, Standard(0.0), shots=100000, seed=2))
    assert not rep.violated


def test_joint_witness_readout_threshold():
    g, alpha = 0.1, 100.0
    p = SystemParams.from_dimensionless(g, 1e-6, alpha=alpha)
    conf = ProtocolConfig(p, Standard(0.0), shots=N6, seed=3, delta_x=DELTA_X_ENTANGLEMENT)
    rep = joint_witness_sampling(conf)
    ref = witness_analytic(WitnessInputs(g0tau=g, alpha=alpha, delta_x=DELTA_X_ENTANGLEMENT))
    assert abs(rep.margin - ref.margin) < 5 * rep.std_errors["margin"]
    # sqrt(1.5) is the large-(4 g0tau alpha)^2 estimate; the margin sits a few percent of lhs from 0
    assert abs(rep.margin) < 0.05 * rep.lhs


def test_joint_witness_thermal():
    p = _witness_params(25.0, n_th=0.5)
    rep = joint_witness_sampling(ProtocolConfig(p, Standard(0.0), shots=N6, seed=4,
                                                sigma_lo=0.05))
    ref = witness_analytic(WitnessInputs(g0tau=0.1, alpha=5.0, n_th=0.5, sigma_lo=0.05))
    assert abs(rep.margin - ref.margin) < 5 * rep.std_errors["margin"]


def test_joint_witness_shot_floor():
    with pytest.raises(ValueError):
        joint_witness_sampling(ProtocolConfig(_witness_params(25.0), Standard(0.0), shots=10))
