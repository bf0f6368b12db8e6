"""Monte Carlo simulation of the pulse-readout-feedback-homodyne protocol.

Per shot the simulation draws, in order,

1. a decoherence phase ``phi_deco`` from the distribution whose
   characteristic function is ``xi(eta)``;
2. the mirror position ``x`` (x0 units) and a noisy readout
   ``x_meas = x + delta_x * N(0, 1)``;
3. the feedback phase ``-(-1)^k g0tau x_meas`` which cancels the
   entangling phase ``(-1)^k g0tau x`` up to ``g0tau (x - x_meas)``;
4. a local-oscillator jitter and the homodyne outcome
   ``N(sqrt(2) alpha cos(theta + phi_lo - phase), 1/2)``.

All randomness comes from the counter-based stream of the kernel backend,
so every shot is a pure function of ``(seed, shot index)`` and results do
not depend on how shots are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dct
from scipy.interpolate import PchipInterpolator

from . import _backend
from ._kernels_py import PHASE_GAUSS, PHASE_POINT, PHASE_TABLE
from .decoherence import DecoherenceModel, PhaseKernel, Tabulated
from .phys_core import (
    EPSILON_MAX,
    PulsedRegimeError,
    SystemParams,
    pulsed_regime_epsilon,
    pulsed_regime_valid,
)
from .witness import (
    WitnessInputs,
    WitnessMoments,
    _assemble,
    _margin_gradient,
    _poisson_amplitudes,
    _check_cutoff,
)

__all__ = [
    "ProtocolConfig",
    "ShotRecord",
    "ShotRecords",
    "MomentEstimate",
    "PhaseSampler",
    "SamplerError",
    "build_phase_sampler",
    "run_protocol",
    "joint_witness_sampling",
    "BLOCK_SIZE",
    "MIN_WITNESS_SHOTS",
]

BLOCK_SIZE = 65536
MIN_WITNESS_SHOTS = 1000
# interpolated rate profiles leave negative lobes near 1e-8 of the peak; rates
# that are not valid localisation rates (e.g. gamma ~ x^4) go negative by percents
NEGATIVE_DENSITY_TOL = 1e-6
# sampler grid: eta spacing and window width in units of the half-decay scale
_GRID_POINTS = 1 << 19
_STEPS_PER_SCALE = 100
_WINDOW_SCALES = 200.0
_TAIL_MASS = 1e-12


class SamplerError(ValueError):
    """The decoherence-phase distribution could not be tabulated."""


def _mean(x):
    return float(np.add.reduce(x)) / x.size


# ---------------------------------------------------------------- config and records


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol run.

    ``delta_x`` is the position-readout noise in x0 units, ``sigma_lo`` the
    rms LO phase jitter (rad) and ``k`` the number of half periods between
    the entangling pulse and the readout.  ``workers`` and ``backend`` only
    affect speed.
    """

    params: SystemParams
    model: DecoherenceModel
    k: int = 0
    theta: float = 0.5 * math.pi
    shots: int = 100_000
    seed: int = 0
    delta_x: float = 0.0
    sigma_lo: float = 0.0
    workers: int = 1
    backend: str | None = None

    def __post_init__(self):
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError("shots must be a positive integer")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a nonnegative integer")
        if not (self.delta_x >= 0 and self.sigma_lo >= 0):
            raise ValueError("noise fields must be >= 0")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def sign_k(self):
        return -1.0 if self.k % 2 else 1.0

    def kernel(self):
        p = self.params
        return PhaseKernel(self.model, self.k, p.omega_m, p.g0tau, p.x0)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ShotRecord:
    phi_deco: float
    x_meas: float
    phi_feedback: float
    quadrature_outcome: float


@dataclass
class ShotRecords:
    """Column-oriented shot records."""

    phi_deco: np.ndarray
    x_meas: np.ndarray
    phi_feedback: np.ndarray
    outcome: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(*(np.empty(n) for _ in range(4)))

    def __len__(self):
        return self.outcome.size

    def __getitem__(self, i):
        return ShotRecord(float(self.phi_deco[i]), float(self.x_meas[i]),
                          float(self.phi_feedback[i]), float(self.outcome[i]))

    def columns(self):
        return {"phi_deco_rad": self.phi_deco, "x_meas_x0": self.x_meas,
                "phi_feedback_rad": self.phi_feedback, "outcome": self.outcome}


@dataclass(frozen=True)
class MomentEstimate:
    """Sample moments with standard errors.

    ``variance`` is the unbiased sample variance; ``std_error_var`` uses the
    fourth central moment.  Every sum runs over the complete sample in one
    fixed (pairwise) order, so the estimate does not depend on how the shots
    were split across workers.
    """

    mean: float
    second_moment: float
    variance: float
    std_error_mean: float
    std_error_var: float
    shots: int

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=np.float64)
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        mean = _mean(x)
        second = _mean(x * x)
        d = x - mean
        d2 = d * d
        m2 = _mean(d2)
        m4 = _mean(d2 * d2)
        if n == 1:
            return cls(mean, second, 0.0, math.nan, math.nan, 1)
        var = m2 * n / (n - 1)
        se_var = math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)
        return cls(mean, second, var, math.sqrt(var / n), se_var, n)


# ---------------------------------------------------------------- phase sampler


@dataclass(frozen=True)
class PhaseSampler:
    """Distribution of the decoherence phase.

    ``mode`` is ``"point"`` (no decoherence), ``"gauss"`` (rms ``phase_std``)
    or ``"table"`` (inverse CDF ``phis`` against ``cdf`` with an atom of
    weight ``atom`` at zero).  ``window`` is the rms width of the Gaussian
    smoothing applied to the continuous part of a tabulated distribution, in
    units of eta; its characteristic function is multiplied by
    ``exp(-eta^2 / (2 window^2))``.
    """

    mode: str
    phase_std: float = 0.0
    cdf: np.ndarray = field(default_factory=lambda: np.zeros(1))
    phis: np.ndarray = field(default_factory=lambda: np.zeros(1))
    atom: float = 0.0
    window: float = math.inf

    @property
    def mode_code(self):
        return {"point": PHASE_POINT, "gauss": PHASE_GAUSS, "table": PHASE_TABLE}[self.mode]

    def sample(self, n, seed=0, start=0, backend=None):
        kern = _backend.get_kernels(backend)
        key = kern.seed_key(seed)
        return kern.sample_phase(key, start, n, self.mode_code, self.phase_std,
                                 self.cdf, self.phis)

    def characteristic(self, eta):
        """``E[exp(i eta phi)]`` of the tabulated law (piecewise-uniform density)."""
        eta = np.atleast_1d(np.asarray(eta, dtype=np.float64))
        if self.mode == "point":
            return np.ones_like(eta)
        if self.mode == "gauss":
            return np.exp(-0.5 * (eta * self.phase_std) ** 2)
        p0, p1 = self.phis[:-1], self.phis[1:]
        w = np.diff(self.cdf)
        out = np.empty_like(eta)
        for i, e in enumerate(eta):
            mid = 0.5 * (p0 + p1) * e
            half = 0.5 * (p1 - p0) * e
            out[i] = math.fsum(w * np.cos(mid) * np.sinc(half / np.pi))
        return out  # the atom is the cdf jump at phi = 0


def _exponent_function(kernel, eta_max):
    """Vectorised ``-ln xi`` on ``[0, eta_max]``.

    Models without a closed form are averaged on a coarse grid and
    interpolated monotonically.
    """
    probe = kernel.model.average_closed_form(np.zeros(1))
    if probe is not None and not isinstance(kernel.model, Tabulated):
        return lambda eta: kernel.exponent(eta)
    nodes = np.concatenate([[0.0], np.geomspace(eta_max * 1e-6, eta_max, 400)])
    vals = np.asarray(kernel.exponent(nodes), dtype=np.float64)
    vals = np.maximum.accumulate(vals)
    interp = PchipInterpolator(nodes, vals)
    return lambda eta: interp(np.clip(eta, 0.0, eta_max))


def _eta_limit(kernel):
    """Largest eta at which the model can be evaluated."""
    model = kernel.model
    if isinstance(model, Tabulated):
        # shaved so that rounding never carries X past the last sample
        return model.x_max / (2.0 * kernel.g0tau * kernel.x0) * (1.0 - 1e-12)
    return math.inf


def build_phase_sampler(kernel):
    """Sampler whose characteristic function is ``xi(eta)`` of ``kernel``.

    Quadratic models give an exact Gaussian.  Otherwise ``xi`` splits into
    an atom ``c = lim xi`` at zero phase and a continuous part obtained by a
    cosine transform of ``(xi - c) * exp(-eta^2 / (2 W^2))``, where ``W`` is
    ``200`` times the scale on which ``xi - c`` halves.  The window keeps the
    transform a proper density when ``xi - c`` decays slowly and perturbs
    the characteristic function by at most ``(eta / W)^2 / 2``.
    """
    if kernel.k == 0:
        return PhaseSampler("point")
    a = kernel.gaussian_coefficient()
    if a is not None:
        return PhaseSampler("gauss", phase_std=math.sqrt(2.0 * a)) if a > 0 else PhaseSampler("point")

    sat = kernel.model.saturation_rate()
    atom = 0.0 if sat is None or math.isinf(sat) else math.exp(-kernel.elapsed * sat)
    cont = 1.0 - atom
    if cont < 1e-15:
        return PhaseSampler("point")
    eta_lim = _eta_limit(kernel)

    def psi_exact(eta):
        return np.exp(-np.asarray(kernel.exponent(eta), dtype=np.float64)) - atom

    # half-decay scale of the continuous part
    hi = 1.0
    while psi_exact(min(hi, eta_lim)) > 0.5 * cont:
        if hi >= eta_lim:
            raise SamplerError("xi does not decay within the tabulated range")
        hi *= 2.0
        if hi > 1e300:
            raise SamplerError("xi does not decay")
    lo = hi / 2.0
    while psi_exact(lo) < 0.5 * cont and lo > 1e-300:
        lo /= 2.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if psi_exact(mid) > 0.5 * cont:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-6:
            break
    scale = hi
    d_eta = scale / _STEPS_PER_SCALE
    eta = np.arange(_GRID_POINTS) * d_eta
    window = _WINDOW_SCALES * scale
    eta_max = eta[-1]
    if eta_max > eta_lim:
        if psi_exact(eta_lim) > _TAIL_MASS * cont:
            raise SamplerError("xi does not decay within the tabulated range")
        inside = eta <= eta_lim
        psi = np.zeros_like(eta)
        psi[inside] = np.exp(-_exponent_function(kernel, eta_lim)(eta[inside])) - atom
    else:
        psi = np.exp(-_exponent_function(kernel, eta_max)(eta)) - atom
    values = np.clip(psi, 0.0, None) * np.exp(-0.5 * (eta / window) ** 2)
    # trapezoid cosine transform on phi_j = pi j / eta_max
    density = dct(values, type=1) * d_eta / (2.0 * math.pi)
    phi = np.arange(_GRID_POINTS) * (math.pi / eta_max)
    peak = density.max()
    if density.min() < -NEGATIVE_DENSITY_TOL * peak:
        raise SamplerError(f"negative phase density {density.min():.3g} (peak {peak:.3g})")
    density = np.clip(density, 0.0, None)
    side = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(phi))])
    total = side[-1]
    if not total > 0:
        raise SamplerError("phase density has no mass")
    # relative mass beyond the grid, estimated from the last decade of the density
    if density[-1] * phi[-1] / 3.0 > 1e-6 * total:
        raise SamplerError("phase density not resolved on the grid")
    keep = np.searchsorted(side, total * (1.0 - _TAIL_MASS)) + 2
    phi, side = phi[:keep], side[:keep]
    side = side / side[-1] * (0.5 * cont)
    left_cdf = 0.5 * cont - side[::-1]
    right_cdf = 0.5 * (1.0 + atom) + side
    cdf = np.concatenate([left_cdf, right_cdf])
    phis = np.concatenate([-phi[::-1], phi])
    cdf[-1] = 1.0
    cdf[0] = 0.0
    cdf, idx = np.unique(cdf, return_index=True)
    return PhaseSampler("table", cdf=cdf, phis=phis[idx], atom=atom, window=window)


# ---------------------------------------------------------------- protocol


def _blocks(shots):
    return [(s, min(BLOCK_SIZE, shots - s)) for s in range(0, shots, BLOCK_SIZE)]


def _run_blocks(fn, shots, workers):
    blocks = _blocks(shots)
    if workers == 1 or len(blocks) == 1:
        for b in blocks:
            fn(*b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda b: fn(*b), blocks))


def run_protocol(config, sampler=None):
    """Simulate ``config.shots`` protocol runs.

    Returns the shot records and the moments of the homodyne outcome.
    ``sampler`` may be passed to reuse a phase sampler across runs.
    """
    p = config.params
    p.check_pulsed()
    if not pulsed_regime_valid(p.alpha, p.g0, p.tau, p.omega_m):
        eps = pulsed_regime_epsilon(p.alpha, p.g0, p.tau, p.omega_m)
        raise PulsedRegimeError(f"pulsed-regime figure eps = {eps:.4g} exceeds {EPSILON_MAX}")
    if sampler is None:
        sampler = build_phase_sampler(config.kernel())
    kern = _backend.get_kernels(config.backend)
    key = kern.seed_key(config.seed)
    rec = ShotRecords.empty(config.shots)
    x_std = math.sqrt(1.0 + 2.0 * p.n_th)

    def block(start, count):
        sl = slice(start, start + count)
        kern.protocol_block(key, start, count, p.alpha, config.theta, config.sign_k,
                            p.g0tau, x_std, config.delta_x, config.sigma_lo,
                            sampler.mode_code, sampler.phase_std, sampler.cdf,
                            sampler.phis, rec.phi_deco[sl], rec.x_meas[sl],
                            rec.phi_feedback[sl], rec.outcome[sl])

    _run_blocks(block, config.shots, config.workers)
    return rec, MomentEstimate.from_samples(rec.outcome)


# ---------------------------------------------------------------- witness sampling


def _poisson_cdf(alpha, cutoff):
    probs = _poisson_amplitudes(alpha, cutoff) ** 2
    cdf = np.cumsum(probs)
    return cdf / cdf[-1]


def _std_error(x):
    d = x - _mean(x)
    return math.sqrt(float(np.add.reduce(d * d)) / (x.size - 1) / x.size)


def joint_witness_sampling(config, cutoff=None, printed_form=False):
    """Empirical witness from simulated measurement records at ``t = 0``.

    Each shot draws a photon number ``n`` and the three measurement
    settings of the witness (mirror momentum, mirror position with light
    phase quadrature, light amplitude quadrature), with readout noise
    ``delta_x`` on the mirror and LO jitter ``sigma_lo`` on the light.  The
    verdict requires the margin to exceed three propagated standard errors.
    """
    if config.shots < MIN_WITNESS_SHOTS:
        raise ValueError(f"joint_witness_sampling needs at least {MIN_WITNESS_SHOTS} shots")
    p = config.params
    inputs = WitnessInputs(g0tau=p.g0tau, alpha=p.alpha, n_th=p.n_th,
                           delta_x=config.delta_x, sigma_lo=config.sigma_lo,
                           omega_m=p.omega_m)
    cutoff = _check_cutoff(p.alpha, cutoff)
    pcdf = _poisson_cdf(p.alpha, cutoff)
    kern = _backend.get_kernels(config.backend)
    key = kern.seed_key(config.seed)
    n = config.shots
    s1, s2, cos_est, x_light = (np.empty(n) for _ in range(4))
    x_std = math.sqrt(0.5 + p.n_th)
    p_th_std = math.sqrt(p.n_th)

    def block(start, count):
        sl = slice(start, start + count)
        kern.witness_block(key, start, count, p.alpha, p.g0tau, x_std, p_th_std,
                           config.delta_x, config.sigma_lo, pcdf, s1[sl], s2[sl],
                           cos_est[sl], x_light[sl])

    _run_blocks(block, n, config.workers)
    rows = [s1, s1 * s1, s2, s2 * s2, cos_est, x_light]
    means = np.array([_mean(r) for r in rows])
    moments = WitnessMoments.from_array(means)
    rep = _assemble(inputs, moments, printed_form)
    grad = _margin_gradient(inputs, moments, printed_form)
    lin = sum(g * r for g, r in zip(grad, rows))
    se_margin = _std_error(lin)
    names = ["mean1", "second1", "mean2", "second2", "cos_mean", "xl_mean"]
    errors = {name: _std_error(r) for name, r in zip(names, rows)}
    errors["margin"] = se_margin
    return replace(rep, violated=bool(rep.margin > 3.0 * se_margin), std_errors=errors)
