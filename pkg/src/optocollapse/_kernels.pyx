# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``.

Same signatures, same counter-based random stream.  Transcendental calls go
through libm instead of numpy's vector loops, so the two backends agree to a
few ulp rather than bit for bit; each backend is deterministic on its own.
"""

import numpy as np

from libc.math cimport cos, log, sin, sqrt, M_PI
from libc.stdint cimport uint64_t

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex conj(double complex)
    double cabs(double complex)
    double cimag(double complex)

from ._kernels_py import (
    GOLDEN, MASK64, STRIDE, mix64, seed_key,
    SLOT_PHASE, SLOT_POSITION, SLOT_READOUT, SLOT_LO, SLOT_HOMODYNE,
    S1_PHOTON, S1_THERMAL, S1_VACUUM, S1_READOUT,
    S2_POSITION, S2_READOUT, S2_LO, S2_HOMODYNE,
    S3_POSITION, S3_LO, S3_HOMODYNE,
    PHASE_POINT, PHASE_GAUSS, PHASE_TABLE,
)

cdef uint64_t C_GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t C_STRIDE = STRIDE
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double SQRT2 = sqrt(2.0)
cdef double SQRT_HALF = sqrt(0.5)

cdef int P_PHASE = SLOT_PHASE, P_POSITION = SLOT_POSITION, P_READOUT = SLOT_READOUT
cdef int P_LO = SLOT_LO, P_HOMODYNE = SLOT_HOMODYNE
cdef int W1_PHOTON = S1_PHOTON, W1_THERMAL = S1_THERMAL, W1_VACUUM = S1_VACUUM
cdef int W1_READOUT = S1_READOUT, W2_POSITION = S2_POSITION, W2_READOUT = S2_READOUT
cdef int W2_LO = S2_LO, W2_HOMODYNE = S2_HOMODYNE, W3_POSITION = S3_POSITION
cdef int W3_LO = S3_LO, W3_HOMODYNE = S3_HOMODYNE
cdef int M_POINT = PHASE_POINT, M_GAUSS = PHASE_GAUSS


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t shot, int slot) noexcept nogil:
    cdef uint64_t ctr = shot * C_STRIDE + <uint64_t>(slot + 1)
    cdef uint64_t bits = _mix(key + ctr * C_GOLDEN) >> 11
    return (<double>bits + 0.5) * INV_2_53


cdef inline double _normal(uint64_t key, uint64_t shot, int slot) noexcept nogil:
    cdef double u1 = _uniform(key, shot, slot)
    cdef double u2 = _uniform(key, shot, slot + 1)
    return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)


cdef inline double _interp(double x, const double[::1] xp, const double[::1] fp) noexcept nogil:
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    if x <= xp[0]:
        return fp[0]
    if x >= xp[n - 1]:
        return fp[n - 1]
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xp[mid] <= x:
            lo = mid
        else:
            hi = mid
    return (fp[hi] - fp[lo]) / (xp[hi] - xp[lo]) * (x - xp[lo]) + fp[lo]


cdef inline Py_ssize_t _search_right(double u, const double[::1] cdf) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return lo


def counter_uniform(key, shots, int slot):
    cdef const uint64_t[::1] s = np.ascontiguousarray(shots, dtype=np.uint64)
    out = np.empty(s.shape[0])
    cdef double[::1] o = out
    cdef uint64_t k = key
    cdef Py_ssize_t i
    with nogil:
        for i in range(s.shape[0]):
            o[i] = _uniform(k, s[i], slot)
    return out


def counter_normal(key, shots, int slot):
    cdef const uint64_t[::1] s = np.ascontiguousarray(shots, dtype=np.uint64)
    out = np.empty(s.shape[0])
    cdef double[::1] o = out
    cdef uint64_t k = key
    cdef Py_ssize_t i
    with nogil:
        for i in range(s.shape[0]):
            o[i] = _normal(k, s[i], slot)
    return out


def sample_phase(key, start, Py_ssize_t count, int mode, double phase_std, cdf, phis):
    out = np.zeros(count)
    cdef double[::1] o = out
    cdef const double[::1] c = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phis, dtype=np.float64)
    cdef uint64_t k = key, s0 = start
    cdef Py_ssize_t i
    with nogil:
        if mode == M_GAUSS:
            for i in range(count):
                o[i] = phase_std * _normal(k, s0 + i, P_PHASE)
        elif mode != M_POINT:
            for i in range(count):
                o[i] = _interp(_uniform(k, s0 + i, P_PHASE), c, p)
    return out


def protocol_block(key, start, Py_ssize_t count, double alpha, double theta,
                   double sign_k, double g0tau, double x_std, double delta_x,
                   double sigma_lo, int mode, double phase_std, cdf, phis,
                   double[::1] phi_deco, double[::1] x_meas, double[::1] phi_fb,
                   double[::1] outcome):
    cdef const double[::1] c = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phis, dtype=np.float64)
    cdef uint64_t k = key, s0 = start, shot
    cdef Py_ssize_t i
    cdef double ph, xt, xm, fb, lo, phase
    with nogil:
        for i in range(count):
            shot = s0 + i
            if mode == M_POINT:
                ph = 0.0
            elif mode == M_GAUSS:
                ph = phase_std * _normal(k, shot, P_PHASE)
            else:
                ph = _interp(_uniform(k, shot, P_PHASE), c, p)
            xt = x_std * _normal(k, shot, P_POSITION)
            xm = xt + delta_x * _normal(k, shot, P_READOUT)
            fb = -sign_k * g0tau * xm
            lo = sigma_lo * _normal(k, shot, P_LO)
            phase = sign_k * g0tau * xt + fb + ph
            phi_deco[i] = ph
            x_meas[i] = xm
            phi_fb[i] = fb
            outcome[i] = SQRT2 * alpha * cos(theta + lo - phase) + SQRT_HALF * _normal(k, shot, P_HOMODYNE)


def witness_block(key, start, Py_ssize_t count, double alpha, double g0tau,
                  double x_std, double p_th_std, double delta_x, double sigma_lo,
                  poisson_cdf, double[::1] s1, double[::1] s2,
                  double[::1] cos_est, double[::1] x_light):
    cdef const double[::1] pc = np.ascontiguousarray(poisson_cdf, dtype=np.float64)
    cdef uint64_t k = key, s0 = start, shot
    cdef Py_ssize_t i
    cdef double sd = delta_x / SQRT2, q = SQRT2 * g0tau
    cdef double n, pm, xm, xr, lo2, pl, xm3, lo3
    with nogil:
        for i in range(count):
            shot = s0 + i
            n = <double>_search_right(_uniform(k, shot, W1_PHOTON), pc)
            pm = SQRT2 * g0tau * n + p_th_std * _normal(k, shot, W1_THERMAL) + SQRT_HALF * _normal(k, shot, W1_VACUUM)
            s1[i] = (pm + sd * _normal(k, shot, W1_READOUT)) - SQRT2 * g0tau * n
            xm = x_std * _normal(k, shot, W2_POSITION)
            xr = xm + sd * _normal(k, shot, W2_READOUT)
            lo2 = sigma_lo * _normal(k, shot, W2_LO)
            pl = SQRT2 * alpha * cos(0.5 * M_PI + lo2 - q * xm) + SQRT_HALF * _normal(k, shot, W2_HOMODYNE)
            s2[i] = SQRT2 * alpha * sin(q * xr) - pl
            cos_est[i] = cos(q * xr)
            xm3 = x_std * _normal(k, shot, W3_POSITION)
            lo3 = sigma_lo * _normal(k, shot, W3_LO)
            x_light[i] = SQRT2 * alpha * cos(lo3 - q * xm3) + SQRT_HALF * _normal(k, shot, W3_HOMODYNE)


def branch_displacement_matrix(Py_ssize_t cutoff, double complex b,
                               double complex gamma, double complex z):
    cdef Py_ssize_t N = cutoff + 1, n, m
    out = np.empty((N, N), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    beta_arr = np.empty(N, dtype=np.complex128)
    kp_arr = np.empty(N)
    cdef double complex[::1] beta = beta_arr
    cdef double[::1] kp = kp_arr
    cdef double complex b1, b2, v, lm
    with nogil:
        for n in range(N):
            beta[n] = gamma + n * b
            kp[n] = cimag(n * b * conj(gamma))
        for n in range(N):
            b1 = beta[n]
            for m in range(N):
                b2 = beta[m]
                v = b2 + z
                lm = (1j * (kp[m] - kp[n])
                      + 0.5 * (z * conj(b2) - conj(z) * b2)
                      - 0.5 * cabs(b1) ** 2
                      - 0.5 * cabs(v) ** 2
                      + conj(b1) * v)
                o[n, m] = cexp(lm)
    return out


def bilinear_sum(c, light, mech):
    cdef const double[::1] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double complex[:, ::1] L = np.ascontiguousarray(light, dtype=np.complex128)
    cdef const double complex[:, ::1] M = np.ascontiguousarray(mech, dtype=np.complex128)
    cdef Py_ssize_t N = cc.shape[0], n, m
    cdef double complex acc = 0
    with nogil:
        for n in range(N):
            for m in range(N):
                acc = acc + cc[n] * cc[m] * L[n, m] * M[n, m]
    return complex(acc)
