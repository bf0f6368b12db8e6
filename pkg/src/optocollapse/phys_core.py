"""Pulsed-regime optomechanical state and its derived quantities.

Quadrature convention (shared by every module)::

    X = (a + a^dag) / sqrt(2),   P = (a - a^dag) / (i sqrt(2)),   [X, P] = i

so a coherent state ``|beta>`` has ``<X> = sqrt(2) Re beta``,
``<P> = sqrt(2) Im beta`` and both variances equal 1/2.  Mechanical
quadratures ``X_M, P_M`` are dimensionless in the same convention; a physical
mirror displacement ``x`` corresponds to ``X_M = x / (sqrt(2) x0)``.  Lengths
quoted "in x0 units" (readout noise, measured positions) are ``x / x0``.

Everything else is SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .constants import C, HBAR

__all__ = [
    "EPSILON_MAX",
    "PulsedRegimeError",
    "SystemParams",
    "zero_point_spread",
    "coupling_g0",
    "kappa_from_finesse",
    "position_spread",
    "branch_amplitude",
    "pulsed_regime_epsilon",
    "pulsed_regime_valid",
    "measurement_phase_offset",
    "load_preset",
]

#: Largest ``lambda * alpha**2`` accepted as "pulsed".  The recommended drive
#: ``alpha**2 = 0.6 / ((g0 tau)**2 omega_m tau)`` sits exactly on it.
EPSILON_MAX = 0.1


class PulsedRegimeError(ValueError):
    """Raised when parameters leave the regime where the pulsed state holds."""


def _require_positive(**values):
    for name, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive finite number, got {v!r}")


def zero_point_spread(M, omega_m):
    """Mechanical zero-point fluctuation ``x0 = sqrt(hbar / (2 M omega_m))`` in m."""
    _require_positive(M=M, omega_m=omega_m)
    return math.sqrt(HBAR / (2.0 * M * omega_m))


def coupling_g0(omega_c, L, M, omega_m):
    """Single-photon optomechanical coupling ``g0 = (omega_c / L) x0`` in rad/s."""
    _require_positive(omega_c=omega_c, L=L)
    return omega_c / L * zero_point_spread(M, omega_m)


def kappa_from_finesse(L, F):
    """Cavity amplitude decay rate ``pi c / (2 L F)``.

    With this convention a readout/drive pulse of duration ``ln 2 / kappa``
    on a 0.5 cm, F = 1.5e5 cavity lasts 1.10 us.
    """
    _require_positive(L=L, F=F)
    return math.pi * C / (2.0 * L * F)


@dataclass(frozen=True)
class SystemParams:
    """An optomechanical platform plus the drive pulse.

    Attributes
    ----------
    M : float
        Effective mass (kg).
    omega_m : float
        Mechanical angular frequency (rad/s).
    L : float
        Cavity length (m).
    omega_c : float
        Optical angular frequency (rad/s).
    F : float
        Cavity finesse.
    tau : float
        Pulse duration (s).
    alpha : float
        Real coherent amplitude of the drive pulse.
    n_th : float
        Initial thermal occupation of the mechanical mode.
    """

    M: float
    omega_m: float
    L: float
    omega_c: float
    F: float
    tau: float
    alpha: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        _require_positive(M=self.M, omega_m=self.omega_m, L=self.L,
                          omega_c=self.omega_c, F=self.F, tau=self.tau)
        for name in ("alpha", "n_th"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def x0(self):
        return zero_point_spread(self.M, self.omega_m)

    @property
    def g0(self):
        return coupling_g0(self.omega_c, self.L, self.M, self.omega_m)

    @property
    def g0tau(self):
        return self.g0 * self.tau

    @property
    def omega_m_tau(self):
        return self.omega_m * self.tau

    @property
    def kappa(self):
        return kappa_from_finesse(self.L, self.F)

    def check_pulsed(self):
        """Raise :class:`PulsedRegimeError` unless ``g0 tau < 1`` and ``omega_m tau < 1``."""
        if not self.g0tau < 1.0:
            raise PulsedRegimeError(f"g0*tau = {self.g0tau:.4g} is not < 1")
        if not self.omega_m_tau < 1.0:
            raise PulsedRegimeError(f"omega_m*tau = {self.omega_m_tau:.4g} is not < 1")
        return self

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def from_dimensionless(cls, g0tau, omega_m_tau, alpha=0.0, n_th=0.0,
                           M=6e-11, omega_m=2 * math.pi * 2e4, L=5e-3, F=1.5e5):
        """Build a platform with prescribed ``g0 tau`` and ``omega_m tau``.

        The optical frequency is solved from ``g0``; useful for desk-scale
        runs where the dimensionless couplings are the real inputs.
        """
        _require_positive(g0tau=g0tau, omega_m_tau=omega_m_tau)
        tau = omega_m_tau / omega_m
        g0 = g0tau / tau
        omega_c = g0 * L / zero_point_spread(M, omega_m)
        return cls(M=M, omega_m=omega_m, L=L, omega_c=omega_c, F=F, tau=tau,
                   alpha=alpha, n_th=n_th)


def position_spread(alpha, g0, tau, x0):
    """Average position delocalisation ``x0 sqrt(1 + 2 g0^2 alpha^2 tau^2)``."""
    g0tau = g0 * tau
    if not 0 <= g0tau < 0.5:
        raise PulsedRegimeError(f"position_spread needs g0*tau < 0.5, got {g0tau:.4g}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return x0 * math.sqrt(1.0 + 2.0 * (g0tau * alpha) ** 2)


def branch_amplitude(n, g0, omega_m, tau, t, exact=False):
    """Coherent amplitude of the mirror in the ``n``-photon branch at time ``t``.

    Pulsed mode returns ``i n g0 tau exp(-i omega_m t)``.  Exact mode uses the
    finite-pulse kick ``beta = (g0 / omega_m)(1 - exp(-i omega_m tau))`` and
    returns ``n beta exp(-i omega_m t)``; its phase trails the pulsed value by
    ``omega_m tau / 2``.
    """
    if n < 0:
        raise ValueError("photon number must be >= 0")
    rot = complex(math.cos(omega_m * t), -math.sin(omega_m * t))
    if exact:
        beta = g0 / omega_m * (1.0 - complex(math.cos(omega_m * tau), -math.sin(omega_m * tau)))
    else:
        beta = 1j * g0 * tau
    return n * beta * rot


def measurement_phase_offset(omega_m, tau):
    """Rotation ``omega_m tau / 2`` to add to position-readout timing for finite pulses."""
    return 0.5 * omega_m * tau


def pulsed_regime_epsilon(alpha, g0, tau, omega_m):
    """Kerr-phase figure of merit ``eps = lambda alpha^2 = alpha^2 (g0 tau)^2 omega_m tau / 6``.

    The leading-order infidelity against the ideal pulsed state is ``eps**2``.
    """
    return alpha**2 * (g0 * tau) ** 2 * (omega_m * tau) / 6.0


def pulsed_regime_valid(alpha, g0, tau, omega_m, eps_max=EPSILON_MAX):
    return pulsed_regime_epsilon(alpha, g0, tau, omega_m) <= eps_max * (1 + 1e-12)


def load_preset(name):
    """Return the :class:`SystemParams` of a bundled preset (e.g. ``"trampoline-60ng"``)."""
    from .config import load_preset_config

    return load_preset_config(name).system
