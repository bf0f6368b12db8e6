"""Spatial-decoherence models and the phase-noise channel they imprint on light.

A model is a localisation rate ``gamma(x)`` (1/s) at which the coherence
``|x><y|`` decays, with ``x`` the separation in metres.  After ``k`` half
periods the light reflected in the protocol has picked up a random phase
with characteristic function::

    xi(eta) = exp(-(k pi / omega_m) <gamma(2 |eta| g0tau x0 sin(phi_m))>)

where ``<.>`` averages the mirror phase ``phi_m`` over half a period.  The
homodyne angle of the light (``theta`` below) is a separate variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .constants import AMU, G, HBAR, K_B

__all__ = [
    "DecoherenceModel",
    "Standard",
    "EllisQuadratic",
    "DiosiPenrose",
    "Tabulated",
    "NoDecoherenceError",
    "QuadratureError",
    "PhaseKernel",
    "DoublingTime",
    "gamma",
    "half_period_average",
    "xi",
    "quadrature_moments",
    "doubling_time",
    "dp_discriminator",
    "xi_from_moments",
    "standard_lambda",
    "nuclear_radius",
]

QUAD_EPSREL = 1e-9
QUAD_MAX_EVALS = 100_000


class NoDecoherenceError(ValueError):
    """The model produces no decoherence at the probed separation."""


class QuadratureError(RuntimeError):
    pass


def standard_lambda(M, omega_m, Q, T):
    """Quantum-Brownian localisation coefficient ``2 M gamma_m k_B T / hbar^2``.

    ``gamma_m = omega_m / Q`` is the mechanical damping rate.  Units m^-2 s^-1.
    """
    if not (M > 0 and omega_m > 0 and Q > 0 and T >= 0):
        raise ValueError("standard_lambda needs M, omega_m, Q > 0 and T >= 0")
    return 2.0 * M * (omega_m / Q) * K_B * T / HBAR**2


def nuclear_radius(A, r_unit=1.2e-15):
    """Nuclear radius ``1.2 fm * A^(1/3)`` in metres."""
    return r_unit * A ** (1.0 / 3.0)


class DecoherenceModel:
    """Base class: subclasses implement :meth:`rate` (vectorised in ``x``)."""

    name = "model"
    quadratic = False

    def rate(self, x):
        raise NotImplementedError

    def average_closed_form(self, X):
        """Half-period average in closed form, or ``None`` if unavailable."""
        return None

    def saturation_rate(self):
        """``lim_{X -> inf} <gamma(X sin phi)>``; ``inf`` if unbounded, ``None`` if unknown."""
        return None

    def breakpoints(self, X):
        """Mirror phases in (0, pi/2) where ``gamma(X sin phi)`` changes formula."""
        return ()


@dataclass(frozen=True)
class _Quadratic(DecoherenceModel):
    coefficient: float

    quadratic = True

    def __post_init__(self):
        if not (math.isfinite(self.coefficient) and self.coefficient >= 0):
            raise ValueError("localisation coefficient must be finite and >= 0")

    def rate(self, x):
        return self.coefficient * np.square(x)

    def average_closed_form(self, X):
        return 0.5 * self.coefficient * np.square(X)

    def saturation_rate(self):
        return math.inf if self.coefficient > 0 else 0.0


@dataclass(frozen=True)
class Standard(_Quadratic):
    """Environmental decoherence ``gamma(x) = Lambda x^2``."""

    name = "standard"

    @property
    def Lambda(self):
        return self.coefficient

    @classmethod
    def from_bath(cls, M, omega_m, Q, T):
        return cls(standard_lambda(M, omega_m, Q, T))


@dataclass(frozen=True)
class EllisQuadratic(_Quadratic):
    """Ellis-type collapse with ``gamma(x) = Lambda_E x^2``.

    ``Lambda_E`` is a free parameter; :meth:`calibrated` fixes it from a
    target doubling time instead of a microscopic model.
    """

    name = "ellis"

    @property
    def Lambda_E(self):
        return self.coefficient

    @classmethod
    def calibrated(cls, doubling_time_s, alpha, g0tau, x0):
        X = 4.0 * g0tau * x0
        return cls(1.0 / (alpha**2 * X**2 * doubling_time_s))


@dataclass(frozen=True)
class DiosiPenrose(DecoherenceModel):
    """Gravitational collapse for a crystal of ``N`` uniform nuclear spheres.

    ``gamma(x) = prefactor * N * (U(0) - U(x)) / hbar`` with ``U`` the mutual
    gravitational energy of two spheres of mass ``m_nuc`` and radius ``R0``
    whose centres are ``x`` apart.  With ``u = x / (2 R0)``::

        gamma = c (2u^2 - 3u^3/2 + u^5/5)   u <= 1
        gamma = c (6/5 - R0/x)              u > 1,   c = prefactor N G m^2 / (hbar R0)

    ``prefactor`` absorbs the convention ambiguity of the model (default 1).
    """

    R0: float
    m_nuc: float
    N: float
    prefactor: float = 1.0

    name = "diosi-penrose"

    def __post_init__(self):
        if not (self.R0 > 0 and self.m_nuc > 0 and self.N >= 1 and self.prefactor > 0):
            raise ValueError("DiosiPenrose needs R0, m_nuc, prefactor > 0 and N >= 1")

    @classmethod
    def nuclear_spheres(cls, M, A, prefactor=1.0):
        """Mass ``M`` made of nuclei of mass number ``A`` with radius ``1.2 fm A^(1/3)``."""
        m = A * AMU
        return cls(R0=nuclear_radius(A), m_nuc=m, N=M / m, prefactor=prefactor)

    @property
    def scale(self):
        return self.prefactor * self.N * G * self.m_nuc**2 / (HBAR * self.R0)

    @property
    def small_x_coefficient(self):
        """``gamma ~ coefficient * x^2`` for ``x << R0``."""
        return self.prefactor * self.N * G * self.m_nuc**2 / (2.0 * HBAR * self.R0**3)

    def rate(self, x):
        x = np.abs(np.asarray(x, dtype=np.float64))
        u = x / (2.0 * self.R0)
        inner = 2.0 * u**2 - 1.5 * u**3 + 0.2 * u**5
        with np.errstate(divide="ignore"):
            outer = 1.2 - self.R0 / np.where(x > 0, x, 1.0)
        return self.scale * np.where(u <= 1.0, inner, outer)

    def saturation_rate(self):
        return 1.2 * self.scale

    def breakpoints(self, X):
        s = 2.0 * self.R0 / X if X > 0 else math.inf
        return (math.asin(s),) if s < 1.0 else ()

    def average_closed_form(self, X):
        """Exact ``(1/pi) int_0^pi gamma(X sin phi) dphi``.

        Uses ``int_0^a sin^n`` in closed form and ``int dphi / sin = ln tan(phi/2)``.
        """
        X = np.abs(np.asarray(X, dtype=np.float64))
        U = X / (2.0 * self.R0)
        full = 2.0 * U**2 * 0.5 - 1.5 * U**3 * 4.0 / (3.0 * math.pi) \
            + 0.2 * U**5 * 16.0 / (15.0 * math.pi)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(U > 1.0, 1.0 / np.where(U > 0, U, 1.0), 1.0)
            a = np.arcsin(s)
            d = 2.0 * np.sin(0.5 * a) ** 2  # 1 - cos(a) without cancellation
            i2 = _half_x_minus_sin(2.0 * a)
            i3 = d**2 - d**3 / 3.0
            i5 = 4.0 / 3.0 * d**3 - d**4 + 0.2 * d**5
            inner = 2.0 * U**2 * i2 - 1.5 * U**3 * i3 + 0.2 * U**5 * i5
            outer = 1.2 * (0.5 * math.pi - a) + 0.5 * s * np.log(np.tan(0.5 * a))
            split = 2.0 / math.pi * (inner + outer)
        return self.scale * np.where(U > 1.0, split, full)

    def with_prefactor(self, prefactor):
        return replace(self, prefactor=prefactor)

    def calibrated(self, doubling_time_s, alpha, g0tau, x0, omega_m):
        """Copy whose prefactor reproduces ``doubling_time_s`` (leading-order form)."""
        t1 = doubling_time(self.with_prefactor(1.0), alpha, g0tau, x0, omega_m).closed_form
        return self.with_prefactor(t1 / doubling_time_s)


def _half_x_minus_sin(x):
    """``(x - sin x) / 4`` with a Taylor series for small ``x``."""
    x = np.asarray(x, dtype=np.float64)
    x2 = x * x
    series = x * x2 / 24.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    return np.where(x < 0.2, series, 0.25 * (x - np.sin(x)))


class Tabulated(DecoherenceModel):
    """Rates from samples ``(x, gamma)`` with monotone cubic interpolation in ``x^2``.

    Interpolating in ``x^2`` keeps the rate even and smooth at the origin;
    an interpolant with a kink there is not a valid localisation rate and
    gives the phase a distribution with negative density.  The table must
    start at ``x = 0`` and have nondecreasing, nonnegative rates; queries
    beyond the last sample raise.
    """

    name = "table"

    def __init__(self, x, gamma_values):
        x = np.asarray(x, dtype=np.float64)
        g = np.asarray(gamma_values, dtype=np.float64)
        if x.ndim != 1 or x.shape != g.shape or x.size < 2:
            raise ValueError("need matching 1-d arrays with at least two samples")
        if x[0] != 0 or np.any(np.diff(x) <= 0):
            raise ValueError("x samples must start at 0 and increase strictly")
        if np.any(g < 0) or np.any(np.diff(g) < 0):
            raise ValueError("gamma samples must be nonnegative and nondecreasing")
        self.x = x
        self.gamma_values = g
        self._interp_s = PchipInterpolator(x * x, g, extrapolate=False)

    @classmethod
    def from_file(cls, path):
        """Two-column CSV ``x_m, gamma_per_s``; an optional header row is skipped."""
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except ValueError:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=1)
        return cls(data[:, 0], data[:, 1])

    @property
    def x_max(self):
        return float(self.x[-1])

    def breakpoints(self, X):
        # interpolant knots, where the second derivative jumps
        if not X > 0:
            return ()
        inner = self.x[(self.x > 0) & (self.x < X)]
        return tuple(np.arcsin(inner / X))

    def rate(self, x):
        ax = np.abs(np.asarray(x, dtype=np.float64))
        if np.any(ax > self.x_max):
            raise ValueError(f"Tabulated model queried at |x| = {ax.max():.3g} m beyond "
                             f"table range {self.x_max:.3g} m")
        return self._interp_s(ax * ax)

    def average_closed_form(self, X):
        g = self.gamma_values
        if np.all(g == g[0]):
            X = np.asarray(X, dtype=np.float64)
            if np.any(np.abs(X) > self.x_max):
                raise ValueError("Tabulated model queried beyond table range")
            return np.full(np.shape(X), g[0])
        return None

    def average_piecewise(self, X, order=16):
        """Half-period average by Gauss-Legendre on each knot interval in ``phi``.

        ``gamma(X sin phi)`` is analytic between the phases where ``X sin phi``
        crosses a knot, so a fixed rule per piece converges to rounding.
        """
        X_arr = np.abs(np.asarray(X, dtype=np.float64))
        if np.any(X_arr > self.x_max) or not np.all(np.isfinite(X_arr)):
            raise ValueError("Tabulated model queried beyond table range")
        nodes, weights = np.polynomial.legendre.leggauss(order)
        out = np.empty(X_arr.size)
        for i, Xv in enumerate(X_arr.ravel()):
            if Xv == 0:
                out[i] = float(self._interp_s(0.0))
                continue
            edges = np.concatenate([[0.0], self.breakpoints(Xv), [0.5 * math.pi]])
            mid = 0.5 * (edges[1:] + edges[:-1])
            half = 0.5 * np.diff(edges)
            phi = mid[:, None] + half[:, None] * nodes
            vals = self._interp_s(np.minimum((Xv * np.sin(phi)) ** 2, self.x_max**2))
            out[i] = 2.0 / math.pi * float(np.add.reduce((half[:, None] * weights * vals).ravel()))
        return float(out[0]) if X_arr.ndim == 0 else out.reshape(X_arr.shape)

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and np.array_equal(self.x, other.x)
                and np.array_equal(self.gamma_values, other.gamma_values))

    def __hash__(self):
        return hash((self.x.tobytes(), self.gamma_values.tobytes()))

    def __repr__(self):
        return f"Tabulated(n={self.x.size}, x_max={self.x_max:.3g})"


# ---------------------------------------------------------------- operations


def gamma(model, x):
    """Localisation rate (1/s) of ``model`` at separation ``x`` (m)."""
    if not np.all(np.isfinite(x)):
        raise ValueError("separation must be finite")
    out = model.rate(x)
    return float(out) if np.ndim(out) == 0 else out


def _average_quad(model, X):
    f = lambda phi: float(model.rate(X * math.sin(phi)))  # noqa: E731
    points = model.breakpoints(X)
    res = integrate.quad(f, 0.0, 0.5 * math.pi, points=points or None, epsabs=0.0,
                         epsrel=QUAD_EPSREL, limit=max(2000, 4 * len(points)), full_output=1)
    val, _, info = res[:3]
    if info["neval"] > QUAD_MAX_EVALS:
        raise QuadratureError(f"quadrature used {info['neval']} evaluations at X = {X:.3g}")
    if len(res) > 3:  # scipy appends a warning message when it gives up
        raise QuadratureError(f"quadrature did not converge at X = {X:.3g} m: {res[3]}")
    return 2.0 / math.pi * val


def half_period_average(model, X, method="auto"):
    """``(1/pi) int_0^pi gamma(X sin phi) dphi`` for amplitude ``X >= 0`` (m).

    ``method="auto"`` uses a closed form when the model has one and adaptive
    Gauss-Kronrod quadrature (relative tolerance 1e-9) otherwise;
    ``method="quad"`` always integrates numerically.
    """
    X_arr = np.asarray(X, dtype=np.float64)
    if np.any(X_arr < 0) or not np.all(np.isfinite(X_arr)):
        raise ValueError("amplitude must be finite and >= 0")
    if method == "auto":
        closed = model.average_closed_form(X_arr)
        if closed is not None:
            return float(closed) if closed.ndim == 0 else closed
        if isinstance(model, Tabulated):
            return model.average_piecewise(X_arr)
    elif method != "quad":
        raise ValueError(f"unknown method {method!r}")
    if X_arr.ndim == 0:
        return _average_quad(model, float(X_arr))
    return np.array([_average_quad(model, float(v)) for v in X_arr.ravel()]).reshape(X_arr.shape)


@dataclass(frozen=True)
class PhaseKernel:
    """Phase-noise channel after ``k`` half periods of mirror decoherence."""

    model: DecoherenceModel
    k: float
    omega_m: float
    g0tau: float
    x0: float

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.omega_m <= 0 or self.x0 <= 0 or self.g0tau <= 0:
            raise ValueError("omega_m, x0 and g0tau must be positive")
        if float(self.model.rate(0.0)) != 0.0:
            raise ValueError("phase kernels need gamma(0) = 0 so that xi(0) = 1")

    @property
    def elapsed(self):
        """Time since the entangling pulse, ``k pi / omega_m`` (s)."""
        return self.k * math.pi / self.omega_m

    def exponent(self, eta, method="auto"):
        """``-ln xi(eta)``."""
        X = 2.0 * np.abs(np.asarray(eta, dtype=np.float64)) * self.g0tau * self.x0
        if self.k == 0:
            return np.zeros_like(X) if X.ndim else 0.0
        return self.elapsed * half_period_average(self.model, X, method)

    def xi(self, eta, method="auto"):
        return np.exp(-self.exponent(eta, method))

    def gaussian_coefficient(self):
        """``a`` with ``xi(eta) = exp(-a eta^2)`` for quadratic models, else ``None``."""
        if not self.model.quadratic:
            return None
        return self.elapsed * 2.0 * self.model.coefficient * (self.g0tau * self.x0) ** 2

    def with_k(self, k):
        return replace(self, k=k)


def xi(kernel, eta):
    """Characteristic function ``xi(eta)`` of the decoherence-induced optical phase."""
    out = kernel.xi(eta)
    return float(out) if np.ndim(out) == 0 else out


def quadrature_moments(kernel, alpha, theta):
    """First and second moments of the homodyne quadrature at angle ``theta``."""
    x1, x2 = xi(kernel, 1.0), xi(kernel, 2.0)
    mean = SQRT2 * alpha * x1 * math.cos(theta)
    second = 0.5 + alpha**2 * (1.0 + math.cos(2.0 * theta) * x2)
    return mean, second


SQRT2 = math.sqrt(2.0)


def xi_from_moments(mean_theta0, second_theta0, second_theta_pi2, alpha):
    """Recover ``(xi(1), xi(2))`` from homodyne moments at ``theta = 0`` and ``pi/2``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    xi1 = mean_theta0 / (SQRT2 * alpha)
    xi2 = (second_theta0 - second_theta_pi2) / (2.0 * alpha**2)
    return xi1, xi2


def dp_discriminator(kernel):
    """``xi(2) / xi(1)^4``; identically 1 for quadratic localisation rates."""
    e1 = float(kernel.exponent(1.0))
    e2 = float(kernel.exponent(2.0))
    if math.exp(-e1) == 0.0:
        raise FloatingPointError(f"xi(1) underflows (exponent {e1:.3g})")
    return math.exp(4.0 * e1 - e2)


@dataclass(frozen=True)
class DoublingTime:
    """Time for ``Var(P_l)`` to grow from 1/2 to 1.

    ``closed_form`` is the leading order in ``alpha``; ``t_exact`` solves the
    variance equation on continuous ``k``; ``k_rounded``/``t_rounded`` snap
    to the nearest physical half period.
    """

    closed_form: float
    t_exact: float
    k_exact: float
    k_rounded: int
    t_rounded: float


def doubling_time(model, alpha, g0tau, x0, omega_m):
    if alpha < 1:
        raise ValueError("doubling_time needs alpha >= 1")
    X = 4.0 * g0tau * x0
    rate = float(half_period_average(model, X))
    if not rate > 0:
        raise NoDecoherenceError(f"{model.name}: no decoherence at separation {X:.3g} m")
    closed = 1.0 / (2.0 * alpha**2 * rate)

    kernel = PhaseKernel(model, 0.0, omega_m, g0tau, x0)
    per_k = math.pi / omega_m * rate  # -ln xi(2) per half period

    def excess(k):
        return 0.5 + alpha**2 * (1.0 - math.exp(-k * per_k)) - 1.0

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise NoDecoherenceError("variance never doubles")
    k_exact = optimize.brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=1e-15, maxiter=500)
    k_round = int(round(k_exact))
    t_exact = kernel.with_k(k_exact).elapsed
    return DoublingTime(closed_form=closed, t_exact=t_exact, k_exact=k_exact,
                        k_rounded=k_round, t_rounded=k_round * math.pi / omega_m)
