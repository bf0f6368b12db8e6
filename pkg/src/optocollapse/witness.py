"""Separability witness for the photon-mirror state.

Observables (dimensionless quadratures, see :mod:`optocollapse.phys_core`)::

    A1 = P_M                        B1 = sqrt(2) g0tau a^dag a
    A2 = sqrt(2) alpha sin(q X_M)   B2 = P_l          q = sqrt(2) g0tau

Every separable state satisfies::

    sqrt(Var(A1 - B1) Var(A2 - B2)) >= (|<[A1, A2]>| + |<[B1, B2]>|) / 2
                                     = alpha g0tau |<cos(q X_M)>| + g0tau |<X_l>| / sqrt(2)

The commutators are evaluated with ``[X, P] = i``.  With the vacuum mirror
and ``g0tau << 1`` the bound is violated once ``alpha^2 > 1 / (16 g0tau^2)``.
``printed_form=True`` selects the weaker bound
``(g0tau / 2)(sqrt(2) alpha |<cos>| + |<X_l>|)``, smaller by ``sqrt(2)``.

Two independent evaluation routes are provided.  :func:`witness_analytic`
sums the Poisson series in closed form through generating functions;
:func:`witness_fock_oracle` builds the state explicitly in a truncated Fock
basis and performs the double sums over photon indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from ._backend import get_kernels

__all__ = [
    "WitnessInputs",
    "WitnessMoments",
    "WitnessReport",
    "witness_analytic",
    "witness_fock_oracle",
    "thermal_oracle",
    "witness_time_sweep",
    "min_alpha_squared",
    "noise_thresholds",
    "default_cutoff",
    "required_cutoff",
    "find_violation_threshold",
    "DELTA_X_ENTANGLEMENT",
    "TAIL_MASS_MAX",
    "VIOLATION_SLACK",
]

SQRT2 = math.sqrt(2.0)
#: Readout noise (x0 units) at which the witness stops detecting entanglement
#: for ``(4 g0tau alpha)^2 >> 1``.
DELTA_X_ENTANGLEMENT = math.sqrt(1.5)
TAIL_MASS_MAX = 1e-12
VIOLATION_SLACK = 1e-12


@dataclass(frozen=True)
class WitnessInputs:
    """Parameters of one witness evaluation.

    ``delta_x`` is the std of the mechanical readout in x0 units (variance
    ``delta_x**2 / 2`` on ``X_M``); ``sigma_lo`` is the std of the homodyne
    local-oscillator phase in rad.  ``t`` is measured from the pulse and
    enters only as ``omega_m * t``.
    """

    g0tau: float
    alpha: float
    t: float = 0.0
    n_th: float = 0.0
    delta_x: float = 0.0
    sigma_lo: float = 0.0
    omega_m: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.g0tau < 0.5:
            raise ValueError(f"g0tau must lie in (0, 0.5), got {self.g0tau!r}")
        for name in ("alpha", "n_th", "delta_x", "sigma_lo"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.omega_m <= 0:
            raise ValueError("omega_m must be positive")

    @property
    def readout_variance(self):
        """Added variance on ``X_M`` / ``P_M`` readouts."""
        return 0.5 * self.delta_x**2

    @property
    def mech_phase(self):
        return self.omega_m * self.t

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class WitnessMoments:
    """Raw first and second moments entering the witness."""

    mean1: float  # <A1 - B1>
    second1: float  # <(A1 - B1)^2>
    mean2: float  # <A2 - B2>
    second2: float  # <(A2 - B2)^2>
    cos_mean: float  # <cos(q X_M)>
    xl_mean: float  # <X_l>

    @property
    def var1(self):
        return self.second1 - self.mean1**2

    @property
    def var2(self):
        return self.second2 - self.mean2**2

    def as_array(self):
        return np.array([self.mean1, self.second1, self.mean2, self.second2,
                         self.cos_mean, self.xl_mean])

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class WitnessReport:
    lhs: float
    rhs: float
    margin: float
    violated: bool
    moments: WitnessMoments | None = None
    std_errors: dict = field(default_factory=dict)

    @property
    def margin_std_error(self):
        return self.std_errors.get("margin")


def _assemble(inputs, moments, printed_form=False, std_errors=None):
    var1, var2 = moments.var1, moments.var2
    lhs = math.sqrt(max(var1, 0.0) * max(var2, 0.0))
    k = inputs.g0tau
    if printed_form:
        rhs = 0.5 * k * (SQRT2 * inputs.alpha * abs(moments.cos_mean) + abs(moments.xl_mean))
    else:
        rhs = inputs.alpha * k * abs(moments.cos_mean) + k * abs(moments.xl_mean) / SQRT2
    margin = rhs - lhs
    return WitnessReport(lhs=lhs, rhs=rhs, margin=margin,
                         violated=bool(margin > VIOLATION_SLACK), moments=moments,
                         std_errors=dict(std_errors or {}))


def _noisy_moments(inputs, e_q, e_2q, a1, a2, n1, w_a, w_ad, mean1, var1_quantum):
    """Apply classical readout and LO noise to quantum expectation values.

    ``e_q = <exp(i q X_M)>``, ``e_2q = <exp(2 i q X_M)>``, ``a1 = <a>``,
    ``a2 = <a^2>``, ``n1 = <a^dag a>``, ``w_a = <exp(i q X_M) a>``,
    ``w_ad = <exp(i q X_M) a^dag>``.
    """
    q = SQRT2 * inputs.g0tau
    v = inputs.readout_variance
    f1 = math.exp(-0.5 * q * q * v)
    f2 = math.exp(-2.0 * q * q * v)
    s2 = inputs.sigma_lo**2
    damp = math.exp(-0.5 * s2)
    c2 = 0.5 * (1.0 + math.exp(-2.0 * s2))
    sn2 = 0.5 * (1.0 - math.exp(-2.0 * s2))

    sin_m = e_q.imag * f1
    cos_m = e_q.real * f1
    sin_sq = 0.5 - 0.5 * e_2q.real * f2
    x_sq = a2.real + n1 + 0.5
    p_sq = -a2.real + n1 + 0.5
    p_mean = SQRT2 * a1.imag
    x_mean = SQRT2 * a1.real
    sin_p = ((w_a - w_ad) / (1j * SQRT2)).imag

    p_tilde = damp * p_mean
    p_tilde_sq = c2 * p_sq + sn2 * x_sq
    sin_p_tilde = f1 * damp * sin_p

    alpha = inputs.alpha
    mean2 = SQRT2 * alpha * sin_m - p_tilde
    second2 = 2.0 * alpha**2 * sin_sq - 2.0 * SQRT2 * alpha * sin_p_tilde + p_tilde_sq
    var1 = var1_quantum + v
    return WitnessMoments(mean1=mean1, second1=var1 + mean1**2, mean2=mean2,
                          second2=second2, cos_mean=cos_m, xl_mean=damp * x_mean)


# ---------------------------------------------------------------- analytic


def _branch_kick(inputs):
    phi = inputs.mech_phase
    return 1j * inputs.g0tau * complex(math.cos(phi), -math.sin(phi))


def _generating_expectation(inputs, q, j, op):
    """``<exp(i q X_M) (x) L>`` for ``L`` in {1, n, a, a^2, a^dag, a^dag^2}.

    For ``|psi> = sum_n c_n |n> D(n b)|gamma>`` the branch overlap
    ``<psi_n|D(z)|psi_{n+j}>`` is ``exp(linear in n)`` so each Poisson sum
    collapses to ``exp(alpha^2 (zeta - 1))`` times a polynomial prefactor.
    The thermal average over gamma is Gaussian and closes exactly.
    """
    b = _branch_kick(inputs)
    z = 1j * q / SQRT2
    zeta = np.exp(2j * (np.conj(b) * z).imag)
    pref = np.exp(-0.5 * j * j * abs(b) ** 2 - j * np.conj(z) * b - 0.5 * abs(z) ** 2
                  - inputs.n_th * abs(j * b + z) ** 2)
    a2 = inputs.alpha**2
    g = np.exp(a2 * (zeta - 1.0))
    alpha = inputs.alpha
    poly = {
        "1": 1.0,
        "n": a2 * zeta,
        "a": alpha,
        "a2": a2,
        "ad": alpha * zeta,
        "ad2": a2 * zeta**2,
    }[op]
    return complex(pref * poly * g)


def _analytic_raw(inputs):
    q = SQRT2 * inputs.g0tau
    e_q = _generating_expectation(inputs, q, 0, "1")
    e_2q = _generating_expectation(inputs, 2 * q, 0, "1")
    a1 = _generating_expectation(inputs, 0.0, 1, "a")
    a2 = _generating_expectation(inputs, 0.0, 2, "a2")
    n1 = _generating_expectation(inputs, 0.0, 0, "n").real
    w_a = _generating_expectation(inputs, q, 1, "a")
    w_ad = _generating_expectation(inputs, q, -1, "ad")
    c = math.cos(inputs.mech_phase)
    k = inputs.g0tau
    a_sq = inputs.alpha**2
    mean1 = SQRT2 * k * a_sq * (c - 1.0)
    var1 = 0.5 + inputs.n_th + 2.0 * k * k * (1.0 - c) ** 2 * a_sq
    return _noisy_moments(inputs, e_q, e_2q, a1, a2, n1, w_a, w_ad, mean1, var1)


def witness_analytic(inputs, printed_form=False):
    """Evaluate both sides of the witness in closed form.

    Exact for the pulsed state with a thermal mirror, Gaussian readout noise
    of ``delta_x`` (x0 units) on both mechanical quadratures and Gaussian
    local-oscillator phase jitter ``sigma_lo``.
    """
    return _assemble(inputs, _analytic_raw(inputs), printed_form)


# ---------------------------------------------------------------- Fock oracle


def required_cutoff(alpha, tail=TAIL_MASS_MAX):
    """Smallest cutoff with Poisson tail mass ``P(n > cutoff) < tail``."""
    mean = alpha * alpha
    n = int(math.floor(mean))
    while poisson.sf(n, mean) >= tail:
        n += max(1, int(math.sqrt(mean + 1)) // 4)
    while n > 0 and poisson.sf(n - 1, mean) < tail:
        n -= 1
    return max(n, 2)


def default_cutoff(alpha):
    """``mean + 10 sqrt(mean)`` photons, raised if the tail test demands it."""
    mean = alpha * alpha
    return max(int(math.ceil(mean + 10.0 * math.sqrt(mean))), required_cutoff(alpha))


def _check_cutoff(alpha, cutoff):
    if cutoff is None:
        return default_cutoff(alpha)
    mean = alpha * alpha
    if poisson.sf(cutoff, mean) >= TAIL_MASS_MAX:
        raise ValueError(
            f"cutoff {cutoff} leaves Poisson tail mass {poisson.sf(cutoff, mean):.3g} "
            f">= {TAIL_MASS_MAX:g}; required cutoff is {required_cutoff(alpha)}")
    return int(cutoff)


def _poisson_amplitudes(alpha, cutoff):
    n = np.arange(cutoff + 1, dtype=np.float64)
    if alpha == 0:
        c = np.zeros(cutoff + 1)
        c[0] = 1.0
        return c
    return np.exp(-0.5 * alpha**2 + n * math.log(alpha) - 0.5 * gammaln(n + 1))


class _FockOperators:
    """Truncated light operators, built once per cutoff."""

    def __init__(self, cutoff):
        N = cutoff + 1
        a = np.diag(np.sqrt(np.arange(1, N, dtype=np.float64)), 1).astype(complex)
        ad = a.conj().T
        self.identity = np.eye(N, dtype=complex)
        self.a = a
        self.ad = ad
        self.num = ad @ a
        self.num_sq = self.num @ self.num
        self.x = (a + ad) / SQRT2
        self.p = (a - ad) / (1j * SQRT2)
        self.x_sq = self.x @ self.x
        self.p_sq = self.p @ self.p


def _fock_raw(inputs, cutoff, gamma=0j, dephase=False, backend=None):
    """Quantum expectations of the pure state ``sum c_n |n> D(n b)|gamma>``."""
    K = get_kernels(backend)
    c = _poisson_amplitudes(inputs.alpha, cutoff)
    ops = _FockOperators(cutoff)
    b = _branch_kick(inputs)
    q = SQRT2 * inputs.g0tau
    overlap = K.branch_displacement_matrix(cutoff, b, gamma, 0j)
    d_q = K.branch_displacement_matrix(cutoff, b, gamma, 1j * q / SQRT2)
    d_2q = K.branch_displacement_matrix(cutoff, b, gamma, 2j * q / SQRT2)
    if dephase:
        # drop the Fock coherences: sum_n p_n |n><n| (x) |psi_n><psi_n|
        keep = np.eye(cutoff + 1)
        overlap, d_q, d_2q = overlap * keep, d_q * keep, d_2q * keep

    n = np.arange(cutoff + 1, dtype=np.float64)
    beta = gamma + n * b
    bn = np.conj(beta)[:, None]
    bm = beta[None, :]
    p_mech = (bm - bn) / (1j * SQRT2) * overlap
    p_mech_sq = -0.5 * (bm**2 + bn**2 - 2.0 * bn * bm - 1.0) * overlap

    def ev(light, mech):
        return K.bilinear_sum(c, light, mech)

    kq = SQRT2 * inputs.g0tau
    mean1 = (ev(ops.identity, p_mech) - kq * ev(ops.num, overlap)).real
    second1 = (ev(ops.identity, p_mech_sq) - 2.0 * kq * ev(ops.num, p_mech)
               + kq * kq * ev(ops.num_sq, overlap)).real
    return dict(
        e_q=ev(ops.identity, d_q),
        e_2q=ev(ops.identity, d_2q),
        a1=ev(ops.a, overlap),
        a2=ev(ops.a @ ops.a, overlap),
        n1=ev(ops.num, overlap).real,
        w_a=ev(ops.a, d_q),
        w_ad=ev(ops.ad, d_q),
        mean1=mean1,
        var1=second1 - mean1**2,
        # raw light second moments, used only for cross-checks
        x_sq=ev(ops.x_sq, overlap).real,
        p_sq=ev(ops.p_sq, overlap).real,
    )


def _fock_moments(inputs, cutoff, gamma=0j, dephase=False, backend=None):
    r = _fock_raw(inputs, cutoff, gamma, dephase, backend)
    return _noisy_moments(inputs, r["e_q"], r["e_2q"], r["a1"], r["a2"], r["n1"],
                          r["w_a"], r["w_ad"], r["mean1"], r["var1"])


def witness_fock_oracle(inputs, cutoff=None, dephase=False, printed_form=False,
                        backend=None):
    """Witness sides by explicit double sums in a truncated Fock basis.

    Pure-state oracle (``n_th`` must be 0).  ``dephase=True`` zeroes the
    photon-number coherences, giving a separable state against which the
    witness must never fire.
    """
    if inputs.n_th != 0:
        raise ValueError("witness_fock_oracle covers n_th = 0; use thermal_oracle")
    cutoff = _check_cutoff(inputs.alpha, cutoff)
    return _assemble(inputs, _fock_moments(inputs, cutoff, 0j, dephase, backend), printed_form)


def thermal_oracle(inputs, cutoff=None, samples=400, seed=0, printed_form=False,
                   backend=None, min_samples=16):
    """Average the Fock oracle over the thermal P-function of the mirror.

    Each sample draws ``mu`` from a complex Gaussian with ``E|mu|^2 = n_th``
    and shifts every branch to ``D(n b)|mu exp(-i omega_m t)>``.  Raw moments
    are averaged (they are linear in the state); the report carries their
    Monte Carlo standard errors and the propagated error on the margin.
    """
    cutoff = _check_cutoff(inputs.alpha, cutoff)
    pure = inputs.with_(n_th=0.0)
    if inputs.n_th == 0:
        rep = _assemble(inputs, _fock_moments(pure, cutoff, 0j, backend=backend), printed_form)
        return replace(rep, std_errors={"margin": 0.0})
    if samples < min_samples:
        raise ValueError(f"thermal_oracle needs at least {min_samples} samples, got {samples}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, 2)) * math.sqrt(inputs.n_th / 2.0)
    rot = complex(math.cos(inputs.mech_phase), -math.sin(inputs.mech_phase))
    rows = np.array([_fock_moments(pure, cutoff, complex(re, im) * rot, backend=backend).as_array()
                     for re, im in z])
    mean = rows.mean(axis=0)
    sem = rows.std(axis=0, ddof=1) / math.sqrt(samples)
    moments = WitnessMoments.from_array(mean)
    names = ["mean1", "second1", "mean2", "second2", "cos_mean", "xl_mean"]
    errors = dict(zip(names, sem))
    # margin error from the per-sample spread of the linearised margin
    base = _assemble(inputs, moments, printed_form)
    grads = _margin_gradient(inputs, moments, printed_form)
    lin = rows @ grads
    errors["margin"] = float(lin.std(ddof=1) / math.sqrt(samples))
    return replace(base, std_errors=errors)


def _margin_gradient(inputs, moments, printed_form, h=1e-7):
    base = moments.as_array()
    m0 = _assemble(inputs, moments, printed_form).margin
    g = np.empty_like(base)
    for i in range(base.size):
        step = h * max(1.0, abs(base[i]))
        shifted = base.copy()
        shifted[i] += step
        g[i] = (_assemble(inputs, WitnessMoments.from_array(shifted), printed_form).margin - m0) / step
    return g


# ---------------------------------------------------------------- utilities


def witness_time_sweep(inputs, times, method="analytic", **kwargs):
    """Reports at each evaluation time in ``times`` (seconds)."""
    fn = witness_analytic if method == "analytic" else witness_fock_oracle
    return [fn(inputs.with_(t=float(t)), **kwargs) for t in times]


def min_alpha_squared(g0tau):
    """Drive strength ``1 / (16 g0tau^2)`` above which the ideal state violates the witness."""
    if not 0.0 < g0tau < 0.5:
        raise ValueError(f"g0tau must lie in (0, 0.5), got {g0tau!r}")
    return 1.0 / (16.0 * g0tau**2)


def noise_thresholds(g0tau, alpha):
    """Largest tolerable LO phase jitter (rad) and readout noise (x0 units) for entanglement.

    Valid for ``(4 g0tau alpha)^2 >> 1``; raises below 10.
    """
    if not 0.0 < g0tau < 0.5:
        raise ValueError(f"g0tau must lie in (0, 0.5), got {g0tau!r}")
    if (4.0 * g0tau * alpha) ** 2 <= 10.0:
        raise ValueError(f"(4 g0tau alpha)^2 = {(4 * g0tau * alpha) ** 2:.3g} is not >> 1")
    return 2.0 * g0tau, DELTA_X_ENTANGLEMENT


def find_violation_threshold(g0tau, method="oracle", rtol=1e-4, cutoff=None, **fields):
    """Bisect for the drive ``alpha^2`` at which the margin changes sign.

    Brackets between 0 and 8 times the predicted threshold.  ``fields`` are
    forwarded to :class:`WitnessInputs` (noise, time, ...).
    """
    def margin(a_sq):
        inp = WitnessInputs(g0tau=g0tau, alpha=math.sqrt(a_sq), **fields)
        if method == "oracle":
            c = cutoff if cutoff is not None else default_cutoff(inp.alpha)
            return witness_fock_oracle(inp, cutoff=c).margin
        return witness_analytic(inp).margin

    lo, hi = 0.0, 8.0 * min_alpha_squared(g0tau)
    if margin(hi) <= 0:
        raise ValueError(f"no violation up to alpha^2 = {hi:g}")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
