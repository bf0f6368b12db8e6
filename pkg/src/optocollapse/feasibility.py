"""Experimental budget: from platform parameters to required precisions and powers.

The chain is

* pulse duration ``tau = ln 2 / kappa`` with ``kappa = pi c / (2 L F)``;
* largest drive ``alpha^2 = 0.6 / ((g0 tau)^2 omega_m tau)`` compatible with the
  pulsed regime;
* tolerable thermal occupation, LO phase jitter and position-readout noise;
* readout and cooling photon numbers and the matching optical powers;
* doubling times for each decoherence model and the verdicts built on them.

Every verdict is a plain inequality between numbers stored in the report;
:func:`audit` recomputes them and :func:`plan` runs it before returning.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from .constants import HBAR
from .decoherence import DecoherenceModel, Standard, doubling_time
from .phys_core import (
    EPSILON_MAX,
    SystemParams,
    kappa_from_finesse,
    pulsed_regime_epsilon,
)
from .witness import DELTA_X_ENTANGLEMENT, min_alpha_squared

__all__ = [
    "FeasibilityReport",
    "Limits",
    "AuditError",
    "kappa_from_finesse",
    "pulse_duration",
    "recommended_alpha_sq",
    "photons_to_power",
    "power_to_photons",
    "readout_precision",
    "readout_photons",
    "cooling_occupation",
    "cooling_photons",
    "occupation_bound",
    "homodyne_bound_entanglement",
    "homodyne_bound_decoherence",
    "position_accuracy_bound",
    "plan",
    "audit",
    "REFERENCE_TARGETS",
]

RECOMMENDED_EPSILON = 0.1
TESTABLE_SUFFIX = "_testable"

# headline numbers quoted for the trampoline platform, for comparison
REFERENCE_TARGETS = {
    "tau": 1.1e-6,
    "alpha_sq_max": 8.6e6,
    "drive_power": 1e-6,
    "n_th_bound": 34.0,
    "sigma_lo_bound_deg": 0.1,
    "delta_x_bound": 0.24,
    "readout_power": 0.38e-6,
    "cooling_power": 1.6e-9,
    "doubling_time_ellis": 5e-5,
    "doubling_time_dp": 2e-8,
}


class AuditError(AssertionError):
    """A verdict disagrees with the numbers it is supposed to follow from."""


def _positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{k} must be positive and finite, got {v!r}")


def pulse_duration(kappa):
    """``ln 2 / kappa``: the readout-pulse duration convention."""
    _positive(kappa=kappa)
    return math.log(2.0) / kappa


def recommended_alpha_sq(g0, tau, omega_m):
    """``0.6 / ((g0 tau)^2 omega_m tau)``, i.e. the drive at ``eps = 0.1``."""
    _positive(g0=g0, tau=tau, omega_m=omega_m)
    return 6.0 * RECOMMENDED_EPSILON / ((g0 * tau) ** 2 * omega_m * tau)


def photons_to_power(N, omega_c, tau):
    """Mean optical power ``N hbar omega_c / tau`` (W)."""
    _positive(N=N, omega_c=omega_c, tau=tau)
    return N * HBAR * omega_c / tau


def power_to_photons(P, omega_c, tau):
    _positive(P=P, omega_c=omega_c, tau=tau)
    return P * tau / (HBAR * omega_c)


def readout_precision(N_p, kappa, g0):
    """Position-readout noise ``kappa / (sqrt(5) g0 sqrt(N_p))`` in x0 units."""
    _positive(N_p=N_p, kappa=kappa, g0=g0)
    return kappa / (math.sqrt(5.0) * g0 * math.sqrt(N_p))


def readout_photons(delta_x, kappa, g0):
    """Photons needed for readout noise ``delta_x`` (x0 units)."""
    _positive(delta_x=delta_x, kappa=kappa, g0=g0)
    return (kappa / (math.sqrt(5.0) * g0 * delta_x)) ** 2


def cooling_occupation(N_p_bar, kappa, g0):
    """Effective occupation ``(sqrt(1 + kappa^4 / (g0^4 N^2)) - 1) / 2`` after measurement cooling."""
    _positive(N_p_bar=N_p_bar, kappa=kappa, g0=g0)
    r = (kappa / g0) ** 4 / N_p_bar**2
    # sqrt(1 + r) - 1 written without cancellation for small r
    return 0.5 * r / (math.sqrt(1.0 + r) + 1.0)


def cooling_photons(n_eff, kappa, g0):
    """Photons needed to reach occupation ``n_eff``."""
    _positive(n_eff=n_eff, kappa=kappa, g0=g0)
    return (kappa / g0) ** 2 / math.sqrt((2.0 * n_eff + 1.0) ** 2 - 1.0)


def occupation_bound(g0tau, alpha):
    """Largest thermal occupation ``8 (g0 tau alpha)^2 - 1/2`` for which entanglement is detected."""
    return 8.0 * (g0tau * alpha) ** 2 - 0.5


def homodyne_bound_entanglement(g0tau):
    """LO jitter (rad) tolerated by the entanglement witness: ``2 g0 tau``."""
    return 2.0 * g0tau


def homodyne_bound_decoherence(alpha):
    """LO jitter (rad) tolerated when recording decoherence: ``1 / (2 alpha)``."""
    _positive(alpha=alpha)
    return 0.5 / alpha


def position_accuracy_bound(g0tau, alpha):
    """Readout noise (x0 units) that doubles the phase-quadrature variance: ``1 / (2 g0 tau alpha)``."""
    _positive(g0tau=g0tau, alpha=alpha)
    return 0.5 / (g0tau * alpha)


@dataclass(frozen=True)
class Limits:
    """Optional experimental limits; ``None`` means unconstrained.

    Powers are in watts, ``n_th`` is the occupation reachable before
    cooling, ``sigma_lo`` the LO jitter (rad) and ``delta_x`` the readout
    noise (x0 units) of the available hardware.
    """

    max_drive_power: float | None = None
    max_readout_power: float | None = None
    max_cooling_power: float | None = None
    n_th: float | None = None
    sigma_lo: float | None = None
    delta_x: float | None = None


def _within(value, limit):
    return limit is None or value <= limit


@dataclass(frozen=True)
class FeasibilityReport:
    kappa: float
    tau: float
    g0: float
    g0tau: float
    omega_m_tau: float
    x0: float
    alpha_sq_max: float
    alpha_sq: float
    epsilon: float
    drive_power: float
    n_th_bound: float
    sigma_lo_bound: float
    sigma_lo_bound_deco: float
    delta_x_bound: float
    delta_x_bound_entanglement: float
    readout_photons: float
    readout_power: float
    cooling_photons: float
    cooling_power: float
    temperature: float
    q_factor: float
    standard_lambda: float
    doubling_times: dict = field(default_factory=dict)
    limits: Limits = field(default_factory=Limits)
    verdicts: dict = field(default_factory=dict)

    @property
    def sigma_lo_bound_deg(self):
        return math.degrees(self.sigma_lo_bound)

    def as_dict(self):
        d = asdict(self)
        d["sigma_lo_bound_deg"] = self.sigma_lo_bound_deg
        return d

    def render(self):
        """Human-readable summary."""
        lines = [
            "optomechanical feasibility report",
            f"cavity linewidth kappa      {self.kappa:.6g} rad/s",
            f"pulse duration tau          {self.tau * 1e6:.4g} us",
            f"g0 tau                      {self.g0tau:.6g}",
            f"omega_m tau                 {self.omega_m_tau:.6g}",
            f"zero-point spread x0        {self.x0:.6g} m",
            f"alpha^2 max                 {self.alpha_sq_max:.6g}",
            f"alpha^2 used                {self.alpha_sq:.6g}  (eps = {self.epsilon:.4g})",
            f"drive power                 {self.drive_power * 1e6:.4g} uW",
            f"n_th bound                  {self.n_th_bound:.4g}",
            f"LO jitter bound (witness)   {self.sigma_lo_bound_deg:.4g} deg",
            f"LO jitter bound (decoh.)    {math.degrees(self.sigma_lo_bound_deco):.4g} deg",
            f"readout bound delta_x/x0    {self.delta_x_bound:.4g}",
            f"readout photons / power     {self.readout_photons:.4g} / {self.readout_power * 1e6:.4g} uW",
            f"cooling photons / power     {self.cooling_photons:.4g} / {self.cooling_power * 1e9:.4g} nW",
            f"bath T / Q                  {self.temperature:g} K / {self.q_factor:g}",
            "doubling times:",
        ]
        for name, t in self.doubling_times.items():
            lines.append(f"  {name:<24s} {t:.4g} s")
        lines.append("verdicts:")
        for name, ok in self.verdicts.items():
            if name.endswith(TESTABLE_SUFFIX):
                lines.append(f"  {name[:-len(TESTABLE_SUFFIX)]}: {'testable' if ok else 'not testable'}")
            else:
                lines.append(f"  {name}: {'pass' if ok else 'fail'}")
        return "\n".join(lines) + "\n"


def _verdicts(r):
    lim = r.limits
    # cooling is needed unless the bare occupation is known to be low enough
    needs_cooling = lim.n_th is None or lim.n_th > r.n_th_bound
    ent = (
        r.epsilon <= EPSILON_MAX * (1 + 1e-12)
        and r.alpha_sq > min_alpha_squared(r.g0tau)
        and r.n_th_bound > 0
        and _within(r.drive_power, lim.max_drive_power)
        and (not needs_cooling or _within(r.cooling_power, lim.max_cooling_power))
        and (lim.sigma_lo is None or lim.sigma_lo <= r.sigma_lo_bound)
        and (lim.delta_x is None or lim.delta_x <= r.delta_x_bound_entanglement)
    )
    rec = (
        _within(r.readout_power, lim.max_readout_power)
        and (lim.delta_x is None or lim.delta_x <= r.delta_x_bound)
        and (lim.sigma_lo is None or lim.sigma_lo <= r.sigma_lo_bound_deco)
    )
    out = {"entanglement_detectable": bool(ent), "decoherence_recordable": bool(rec)}
    # without a bath there is no reference rate, so nothing counts as testable
    t_std = r.doubling_times.get("standard")
    for name, t in r.doubling_times.items():
        if name != "standard":
            out[name + TESTABLE_SUFFIX] = t_std is not None and bool(t < t_std)
    return out


def audit(report):
    """Recompute every verdict from the reported numbers; raise on mismatch."""
    expected = _verdicts(report)
    if expected != report.verdicts:
        raise AuditError(f"verdicts {report.verdicts} do not follow from the numbers ({expected})")
    checks = {
        "n_th_bound": math.isclose(report.n_th_bound,
                                   occupation_bound(report.g0tau, math.sqrt(report.alpha_sq)),
                                   rel_tol=1e-12),
        "sigma_lo_bound": math.isclose(report.sigma_lo_bound, 2.0 * report.g0tau, rel_tol=1e-12),
        "delta_x_bound": math.isclose(report.delta_x_bound,
                                      0.5 / (report.g0tau * math.sqrt(report.alpha_sq)),
                                      rel_tol=1e-12),
    }
    bad = [k for k, ok in checks.items() if not ok]
    if bad:
        raise AuditError(f"inconsistent report entries: {bad}")
    return True


def plan(params, models=None, temperature=None, q_factor=None, limits=None, alpha_sq=None):
    """Budget and verdicts for ``params`` and the collapse ``models``.

    Parameters
    ----------
    params : SystemParams
        Platform.  ``params.tau`` is used as the pulse duration.
    models : dict of str to DecoherenceModel, optional
        Collapse models to test against standard decoherence.
    temperature, q_factor : float, optional
        Bath temperature (K) and mechanical quality factor; together they
        fix the standard-decoherence rate.  Without them no model is
        declared testable.
    limits : Limits, optional
    alpha_sq : float, optional
        Drive strength; defaults to ``params.alpha**2`` if nonzero, else the
        recommended value.
    """
    if not isinstance(params, SystemParams):
        raise TypeError("params must be a SystemParams")
    limits = limits or Limits()
    models = dict(models or {})
    kappa = params.kappa
    tau = params.tau
    g0 = params.g0
    g0tau = params.g0tau
    alpha_sq_max = recommended_alpha_sq(g0, tau, params.omega_m)
    if alpha_sq is None:
        alpha_sq = params.alpha**2 if params.alpha > 0 else alpha_sq_max
    _positive(alpha_sq=alpha_sq)
    alpha = math.sqrt(alpha_sq)
    eps = pulsed_regime_epsilon(alpha, g0, tau, params.omega_m)

    n_bound = occupation_bound(g0tau, alpha)
    dx_bound = position_accuracy_bound(g0tau, alpha)
    n_readout = readout_photons(dx_bound, kappa, g0)
    n_cool = cooling_photons(n_bound, kappa, g0) if n_bound > 0 else math.inf

    lam = math.nan
    times = {}
    if temperature is not None and q_factor is not None:
        _positive(temperature=temperature, q_factor=q_factor)
        std = Standard.from_bath(params.M, params.omega_m, q_factor, temperature)
        lam = std.Lambda
        models = {"standard": std, **{k: v for k, v in models.items() if k != "standard"}}
    for name, model in models.items():
        if not isinstance(model, DecoherenceModel):
            raise TypeError(f"model {name!r} is not a DecoherenceModel")
        try:
            times[name] = doubling_time(model, alpha, g0tau, params.x0, params.omega_m).closed_form
        except Exception as exc:  # add context, keep the type
            raise type(exc)(f"doubling time for model {name!r}: {exc}") from exc

    report = FeasibilityReport(
        kappa=kappa, tau=tau, g0=g0, g0tau=g0tau, omega_m_tau=params.omega_m_tau,
        x0=params.x0, alpha_sq_max=alpha_sq_max, alpha_sq=alpha_sq, epsilon=eps,
        drive_power=photons_to_power(alpha_sq, params.omega_c, tau),
        n_th_bound=n_bound,
        sigma_lo_bound=homodyne_bound_entanglement(g0tau),
        sigma_lo_bound_deco=homodyne_bound_decoherence(alpha),
        delta_x_bound=dx_bound,
        delta_x_bound_entanglement=DELTA_X_ENTANGLEMENT,
        readout_photons=n_readout,
        readout_power=photons_to_power(n_readout, params.omega_c, tau),
        cooling_photons=n_cool,
        cooling_power=photons_to_power(n_cool, params.omega_c, tau) if math.isfinite(n_cool) else math.inf,
        temperature=math.nan if temperature is None else temperature,
        q_factor=math.nan if q_factor is None else q_factor,
        standard_lambda=lam,
        doubling_times=times,
        limits=limits,
    )
    report = replace(report, verdicts=_verdicts(report))
    audit(report)
    return report
