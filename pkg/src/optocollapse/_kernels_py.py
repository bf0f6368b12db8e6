"""Pure numpy implementations of the hot kernels.

``_kernels.pyx`` mirrors every function here with the same signature; the
backend is chosen in :mod:`optocollapse._backend`.

Random numbers come from a counter-based generator: the 64-bit word for
``(shot, slot)`` is the SplitMix64 finaliser applied to
``key + (shot * STRIDE + slot + 1) * GOLDEN``.  Each shot owns ``STRIDE``
slots, so any shot can be regenerated independently of every other.
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = 0xFFFFFFFFFFFFFFFF
STRIDE = 24

# slot layout inside one shot (two slots per normal draw)
SLOT_PHASE = 0
SLOT_POSITION = 2
SLOT_READOUT = 4
SLOT_LO = 6
SLOT_HOMODYNE = 8
# witness settings
S1_PHOTON = 0
S1_THERMAL = 1
S1_VACUUM = 3
S1_READOUT = 5
S2_POSITION = 7
S2_READOUT = 9
S2_LO = 11
S2_HOMODYNE = 13
S3_POSITION = 15
S3_LO = 17
S3_HOMODYNE = 19

PHASE_POINT = 0
PHASE_GAUSS = 1
PHASE_TABLE = 2

_TWO_PI = 2.0 * np.pi
_HALF_PI = 0.5 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0
_SQRT2 = np.sqrt(2.0)
_SQRT_HALF = np.sqrt(0.5)


def mix64(z):
    """SplitMix64 output finaliser on python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_key(seed):
    return mix64(int(seed) & MASK64)


def _mix64_array(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_bits(key, shots, slot):
    """Raw 64-bit words for ``shots`` (uint64 array) at one slot."""
    ctr = shots * np.uint64(STRIDE) + np.uint64(slot + 1)
    return _mix64_array(np.uint64(key) + ctr * np.uint64(GOLDEN))


def counter_uniform(key, shots, slot):
    """Uniforms on the open interval (0, 1)."""
    bits = counter_bits(key, shots, slot) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * _INV_2_53


def counter_normal(key, shots, slot):
    """Standard normals by Box-Muller from slots ``slot`` and ``slot + 1``."""
    u1 = counter_uniform(key, shots, slot)
    u2 = counter_uniform(key, shots, slot + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _shot_indices(start, count):
    return np.arange(start, start + count, dtype=np.uint64)


def sample_phase(key, start, count, mode, phase_std, cdf, phis):
    shots = _shot_indices(start, count)
    if mode == PHASE_POINT:
        return np.zeros(count)
    if mode == PHASE_GAUSS:
        return phase_std * counter_normal(key, shots, SLOT_PHASE)
    u = counter_uniform(key, shots, SLOT_PHASE)
    return np.interp(u, cdf, phis)


def protocol_block(key, start, count, alpha, theta, sign_k, g0tau, x_std,
                   delta_x, sigma_lo, mode, phase_std, cdf, phis,
                   phi_deco, x_meas, phi_fb, outcome):
    """Fill ``count`` shots of the feedback protocol into the output arrays.

    Positions are in x0 units; the light picks up phase ``g0tau * x``
    (``sqrt(2) g0tau X_M``) at the entangling pulse.
    """
    shots = _shot_indices(start, count)
    phi_deco[:] = sample_phase(key, start, count, mode, phase_std, cdf, phis)
    x_true = x_std * counter_normal(key, shots, SLOT_POSITION)
    x_meas[:] = x_true + delta_x * counter_normal(key, shots, SLOT_READOUT)
    phi_fb[:] = -sign_k * g0tau * x_meas
    phi_lo = sigma_lo * counter_normal(key, shots, SLOT_LO)
    phase = sign_k * g0tau * x_true + phi_fb + phi_deco
    mean = _SQRT2 * alpha * np.cos(theta + phi_lo - phase)
    outcome[:] = mean + _SQRT_HALF * counter_normal(key, shots, SLOT_HOMODYNE)


def witness_block(key, start, count, alpha, g0tau, x_std, p_th_std, delta_x,
                  sigma_lo, poisson_cdf, s1, s2, cos_est, x_light):
    """Simulated outcomes of the three witness measurement settings at t = 0.

    Setting 1 records ``P_M - sqrt(2) g0tau n`` (``s1``).  Setting 2 records
    ``sqrt(2) alpha sin(sqrt(2) g0tau X_M) - P_l`` (``s2``) together with
    ``cos(sqrt(2) g0tau X_M)`` (``cos_est``).  Setting 3 records ``X_l``.
    Mechanical readouts carry Gaussian noise of ``delta_x / sqrt(2)`` in
    ``X_M`` units and homodyne angles jitter by ``sigma_lo``.
    """
    shots = _shot_indices(start, count)
    sd_noise = delta_x / _SQRT2
    q = _SQRT2 * g0tau
    # setting 1: photon number and mirror momentum
    u = counter_uniform(key, shots, S1_PHOTON)
    n = np.searchsorted(poisson_cdf, u, side="right").astype(np.float64)
    p_m = (_SQRT2 * g0tau * n + p_th_std * counter_normal(key, shots, S1_THERMAL)
           + _SQRT_HALF * counter_normal(key, shots, S1_VACUUM))
    p_read = p_m + sd_noise * counter_normal(key, shots, S1_READOUT)
    s1[:] = p_read - _SQRT2 * g0tau * n
    # setting 2: mirror position and light phase quadrature
    x_m = x_std * counter_normal(key, shots, S2_POSITION)
    x_read = x_m + sd_noise * counter_normal(key, shots, S2_READOUT)
    lo2 = sigma_lo * counter_normal(key, shots, S2_LO)
    p_l = (_SQRT2 * alpha * np.cos(_HALF_PI + lo2 - q * x_m)
           + _SQRT_HALF * counter_normal(key, shots, S2_HOMODYNE))
    s2[:] = _SQRT2 * alpha * np.sin(q * x_read) - p_l
    cos_est[:] = np.cos(q * x_read)
    # setting 3: light amplitude quadrature
    x_m3 = x_std * counter_normal(key, shots, S3_POSITION)
    lo3 = sigma_lo * counter_normal(key, shots, S3_LO)
    x_light[:] = (_SQRT2 * alpha * np.cos(lo3 - q * x_m3)
                  + _SQRT_HALF * counter_normal(key, shots, S3_HOMODYNE))


def branch_displacement_matrix(cutoff, b, gamma, z):
    """Matrix ``<psi_n| D(z) |psi_m>`` for ``psi_n = D(n b)|gamma>``, ``n, m <= cutoff``.

    Built from the textbook identities ``D(x)|y> = exp(i Im(x y*)) |x + y>``,
    ``<u|D(z)|v> = exp((z v* - z* v) / 2) <u|v + z>`` and
    ``<u|v> = exp(-|u|^2/2 - |v|^2/2 + u* v)``.
    """
    n = np.arange(cutoff + 1, dtype=np.float64)
    beta = gamma + n * b
    kick_phase = (n * b * np.conj(gamma)).imag
    b1 = beta[:, None]
    b2 = beta[None, :]
    v = b2 + z
    log_m = (
        1j * (kick_phase[None, :] - kick_phase[:, None])
        + 0.5 * (z * np.conj(b2) - np.conj(z) * b2)
        - 0.5 * np.abs(b1) ** 2
        - 0.5 * np.abs(v) ** 2
        + np.conj(b1) * v
    )
    return np.exp(log_m)


def bilinear_sum(c, light, mech):
    """``sum_{n,m} c_n c_m light[n, m] mech[n, m]`` with a fixed summation order."""
    w = np.outer(c, c) * light * mech
    return complex(w.sum())
