"""INI configuration files with unit-suffixed keys.

Sections
--------
``[system]``
    ``mass_kg``, ``omega_m_rad_s``, ``cavity_length_m``, ``finesse`` and one of
    ``omega_c_rad_s`` / ``g0_rad_s``.  Optional: ``tau_s`` (``auto`` gives
    ``ln 2 / kappa``), ``alpha`` or ``alpha_sq`` (``recommended`` gives the
    largest pulsed-regime drive), ``n_th``.
``[bath]``
    ``temperature_k``, ``q_factor``.
``[limits]``
    ``max_drive_power_w``, ``max_readout_power_w``, ``max_cooling_power_w``,
    ``n_th``, ``sigma_lo_rad``, ``delta_x_x0``.
``[model.NAME]``
    ``model`` is one of ``standard``, ``ellis``, ``diosi-penrose``, ``table``.
    Per-model keys: ``lambda_per_m2_s`` (standard; defaults to the bath
    value), ``lambda_e_per_m2_s`` (ellis), ``r0_m``, ``m_nuc_kg``,
    ``mass_number``, ``n_nuclei``, ``prefactor`` (diosi-penrose),
    ``table_path`` (table), and ``calibrate_doubling_time_s`` (ellis and
    diosi-penrose) to fit the free coefficient to a doubling time.
``[run]``
    Subcommand parameters, see ``RUN_KEYS``.

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .decoherence import DiosiPenrose, EllisQuadratic, Standard, Tabulated
from .feasibility import Limits, pulse_duration, recommended_alpha_sq
from .phys_core import SystemParams, coupling_g0, kappa_from_finesse, zero_point_spread

__all__ = ["ConfigError", "RunConfig", "load_config", "load_preset_config",
           "list_presets", "parse_config", "RUN_KEYS"]


class ConfigError(ValueError):
    pass


SYSTEM_KEYS = {"mass_kg", "omega_m_rad_s", "cavity_length_m", "omega_c_rad_s", "g0_rad_s",
               "finesse", "tau_s", "alpha", "alpha_sq", "n_th"}
BATH_KEYS = {"temperature_k", "q_factor"}
LIMIT_KEYS = {"max_drive_power_w", "max_readout_power_w", "max_cooling_power_w",
              "n_th", "sigma_lo_rad", "delta_x_x0"}
MODEL_KEYS = {
    "standard": {"model", "lambda_per_m2_s"},
    "ellis": {"model", "lambda_e_per_m2_s", "calibrate_doubling_time_s"},
    "diosi-penrose": {"model", "r0_m", "m_nuc_kg", "mass_number", "n_nuclei", "prefactor",
                      "calibrate_doubling_time_s"},
    "table": {"model", "table_path"},
}
# key -> (type, default)
RUN_KEYS = {
    "model": (str, None),
    "k": (int, 0),
    "k_values": ("ints", "0"),
    "eta_values": ("floats", "0,1,2,3"),
    "theta_rad": (float, 0.5 * math.pi),
    "shots": (int, 100000),
    "seed": (int, 0),
    "delta_x_x0": (float, 0.0),
    "sigma_lo_rad": (float, 0.0),
    "workers": (int, 1),
    "sweep_var": (str, "alpha_sq"),
    "sweep_start": (float, None),
    "sweep_stop": (float, None),
    "sweep_num": (int, 21),
    "sweep_scale": (str, "linear"),
    "witness_g0tau": (float, None),
    "witness_alpha_sq": (float, None),
    "witness_t_s": (float, 0.0),
    "cutoff": (int, None),
    "require": ("strs", ""),
}
NON_PHYSICS_RUN_KEYS = {"workers"}


CALIBRATION_KEYS = ("calibrate_doubling_time_s",)


@dataclass
class RunConfig:
    """Parsed configuration.

    ``resolved`` holds every section with defaults and derived values
    filled in; it is what output headers record.
    """

    system: SystemParams
    temperature: float | None
    q_factor: float | None
    limits: Limits
    models: dict
    run: dict
    resolved: dict = field(default_factory=dict)

    def header_lines(self, exclude=NON_PHYSICS_RUN_KEYS):
        """Resolved configuration as INI lines that load back to the same run.

        Calibration targets appear as ``;`` comments next to the value they fixed.
        """
        lines = []
        for section, items in self.resolved.items():
            lines.append(f"[{section}]")
            for k, v in items.items():
                if section == "run" and k in exclude:
                    continue
                if k in CALIBRATION_KEYS:
                    lines.append(f"; {k} = {v}")
                else:
                    lines.append(f"{k} = {v}")
        return lines


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _float(section, key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return v


def _int(section, key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if v != int(v):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")
    return int(v)


def _check_keys(section, sec, allowed):
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}")


def _require(section, sec, key):
    if key not in sec:
        raise ConfigError(f"[{section}] missing required key {key}")
    return sec[key]


def _parse_system(sec):
    _check_keys("system", sec, SYSTEM_KEYS)
    f = {k: _float("system", k, _require("system", sec, k))
         for k in ("mass_kg", "omega_m_rad_s", "cavity_length_m", "finesse")}
    M, omega_m, L, F = f["mass_kg"], f["omega_m_rad_s"], f["cavity_length_m"], f["finesse"]
    for k, v in f.items():
        if v <= 0:
            raise ConfigError(f"[system] {k} must be positive")
    if ("omega_c_rad_s" in sec) == ("g0_rad_s" in sec):
        raise ConfigError("[system] give exactly one of omega_c_rad_s, g0_rad_s")
    if "omega_c_rad_s" in sec:
        omega_c = _float("system", "omega_c_rad_s", sec["omega_c_rad_s"])
    else:
        omega_c = _float("system", "g0_rad_s", sec["g0_rad_s"]) * L / zero_point_spread(M, omega_m)
    tau_raw = sec.get("tau_s", "auto").strip()
    tau = pulse_duration(kappa_from_finesse(L, F)) if tau_raw == "auto" else _float("system", "tau_s", tau_raw)
    if "alpha" in sec and "alpha_sq" in sec:
        raise ConfigError("[system] give at most one of alpha, alpha_sq")
    if "alpha" in sec:
        alpha = _float("system", "alpha", sec["alpha"])
    else:
        raw = sec.get("alpha_sq", "recommended").strip()
        if raw == "recommended":
            a_sq = recommended_alpha_sq(coupling_g0(omega_c, L, M, omega_m), tau, omega_m)
        else:
            a_sq = _float("system", "alpha_sq", raw)
        if a_sq < 0:
            raise ConfigError("[system] alpha_sq must be >= 0")
        alpha = math.sqrt(a_sq)
    n_th = _float("system", "n_th", sec.get("n_th", "0"))
    try:
        params = SystemParams(M=M, omega_m=omega_m, L=L, omega_c=omega_c, F=F, tau=tau,
                              alpha=alpha, n_th=n_th)
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}") from None
    resolved = {"mass_kg": M, "omega_m_rad_s": omega_m, "cavity_length_m": L,
                "omega_c_rad_s": omega_c, "finesse": F, "tau_s": tau,
                "alpha_sq": alpha**2, "n_th": n_th}
    return params, resolved


def _parse_model(section, sec, params, base_dir, lam_bath):
    kind = _require(section, sec, "model").strip()
    if kind not in MODEL_KEYS:
        raise ConfigError(f"[{section}] unknown model {kind!r}; expected one of {sorted(MODEL_KEYS)}")
    _check_keys(section, sec, MODEL_KEYS[kind])
    num = lambda key, default=None: (_float(section, key, sec[key]) if key in sec  # noqa: E731
                                     else default)
    resolved = {"model": kind}
    alpha = params.alpha
    calib = num("calibrate_doubling_time_s")
    if calib is not None and calib <= 0:
        raise ConfigError(f"[{section}] calibrate_doubling_time_s must be positive")
    if calib is not None and alpha < 1:
        raise ConfigError(f"[{section}] calibration needs alpha >= 1 in [system]")
    if kind == "standard":
        lam = num("lambda_per_m2_s", lam_bath)
        if lam is None:
            raise ConfigError(f"[{section}] needs lambda_per_m2_s or a [bath] section")
        model = Standard(lam)
        resolved["lambda_per_m2_s"] = lam
    elif kind == "ellis":
        if calib is not None:
            if "lambda_e_per_m2_s" in sec:
                raise ConfigError(f"[{section}] give lambda_e_per_m2_s or calibrate_doubling_time_s, not both")
            model = EllisQuadratic.calibrated(calib, alpha, params.g0tau, params.x0)
            resolved["calibrate_doubling_time_s"] = calib
        else:
            model = EllisQuadratic(_float(section, "lambda_e_per_m2_s",
                                          _require(section, sec, "lambda_e_per_m2_s")))
        resolved["lambda_e_per_m2_s"] = model.Lambda_E
    elif kind == "diosi-penrose":
        A = num("mass_number", 28.0)
        r0 = sec.get("r0_m", "auto").strip()
        m_nuc = sec.get("m_nuc_kg", "auto").strip()
        n_nuc = sec.get("n_nuclei", "auto").strip()
        auto = DiosiPenrose.nuclear_spheres(params.M, A)
        R0 = auto.R0 if r0 == "auto" else _float(section, "r0_m", r0)
        m = auto.m_nuc if m_nuc == "auto" else _float(section, "m_nuc_kg", m_nuc)
        N = params.M / m if n_nuc == "auto" else _float(section, "n_nuclei", n_nuc)
        try:
            model = DiosiPenrose(R0=R0, m_nuc=m, N=N, prefactor=num("prefactor", 1.0))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None
        if calib is not None:
            if "prefactor" in sec:
                raise ConfigError(f"[{section}] give prefactor or calibrate_doubling_time_s, not both")
            model = model.calibrated(calib, alpha, params.g0tau, params.x0, params.omega_m)
            resolved["calibrate_doubling_time_s"] = calib
        resolved.update(r0_m=model.R0, m_nuc_kg=model.m_nuc, n_nuclei=model.N,
                        prefactor=model.prefactor)
    else:
        path = Path(_require(section, sec, "table_path").strip())
        if not path.is_absolute():
            path = base_dir / path
        try:
            model = Tabulated.from_file(path)
        except OSError as exc:
            raise ConfigError(f"[{section}] cannot read table: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"[{section}] bad table: {exc}") from None
        resolved["table_path"] = str(path)
    return model, resolved


def _parse_run(sec):
    _check_keys("run", sec, set(RUN_KEYS))
    out = {}
    for key, (kind, default) in RUN_KEYS.items():
        raw = sec.get(key)
        if raw is None:
            if default is None:
                out[key] = None
                continue
            raw = str(default)
        raw = raw.strip()
        if kind is float:
            out[key] = _float("run", key, raw)
        elif kind is int:
            out[key] = _int("run", key, raw)
        elif kind == "ints":
            out[key] = [_int("run", key, s) for s in raw.split(",") if s.strip()]
        elif kind == "floats":
            out[key] = [_float("run", key, s) for s in raw.split(",") if s.strip()]
        elif kind == "strs":
            out[key] = [s.strip() for s in raw.split(",") if s.strip()]
        else:
            out[key] = raw
    if out["shots"] < 1:
        raise ConfigError("[run] shots must be >= 1")
    if out["workers"] < 1:
        raise ConfigError("[run] workers must be >= 1")
    if not 0 <= out["seed"] < 2**64:
        raise ConfigError("[run] seed must fit in 64 bits")
    if any(k < 0 for k in out["k_values"]) or out["k"] < 0:
        raise ConfigError("[run] k values must be >= 0")
    if out["sweep_scale"] not in ("linear", "log"):
        raise ConfigError("[run] sweep_scale must be linear or log")
    return out


def parse_config(parser, base_dir=Path(".")):
    """Build a :class:`RunConfig` from a populated ``ConfigParser``."""
    sections = parser.sections()
    for s in sections:
        if s not in ("system", "bath", "limits", "run") and not s.startswith("model."):
            raise ConfigError(f"unknown section [{s}]")
    if "system" not in sections:
        raise ConfigError("missing [system] section")
    params, sys_resolved = _parse_system(dict(parser["system"]))
    resolved = {"system": sys_resolved}

    T = Q = lam_bath = None
    if "bath" in sections:
        sec = dict(parser["bath"])
        _check_keys("bath", sec, BATH_KEYS)
        T = _float("bath", "temperature_k", _require("bath", sec, "temperature_k"))
        Q = _float("bath", "q_factor", _require("bath", sec, "q_factor"))
        if T <= 0 or Q <= 0:
            raise ConfigError("[bath] temperature_k and q_factor must be positive")
        lam_bath = Standard.from_bath(params.M, params.omega_m, Q, T).Lambda
        resolved["bath"] = {"temperature_k": T, "q_factor": Q}

    limits = Limits()
    if "limits" in sections:
        sec = dict(parser["limits"])
        _check_keys("limits", sec, LIMIT_KEYS)
        vals = {k: _float("limits", k, v) for k, v in sec.items()}
        limits = Limits(max_drive_power=vals.get("max_drive_power_w"),
                        max_readout_power=vals.get("max_readout_power_w"),
                        max_cooling_power=vals.get("max_cooling_power_w"),
                        n_th=vals.get("n_th"), sigma_lo=vals.get("sigma_lo_rad"),
                        delta_x=vals.get("delta_x_x0"))
        resolved["limits"] = dict(sorted(vals.items()))

    models = {}
    for s in sections:
        if s.startswith("model."):
            name = s[len("model."):]
            if not name:
                raise ConfigError(f"section [{s}] needs a model name")
            models[name], resolved[s] = _parse_model(s, dict(parser[s]), params, base_dir, lam_bath)

    run = _parse_run(dict(parser["run"]) if "run" in sections else {})
    if run["model"] is not None and run["model"] not in models:
        raise ConfigError(f"[run] model {run['model']!r} has no [model.{run['model']}] section")
    resolved["run"] = {k: v for k, v in run.items() if v is not None}
    resolved = {s: {k: _fmt(v) for k, v in items.items()} for s, items in resolved.items()}
    return RunConfig(system=params, temperature=T, q_factor=Q, limits=limits, models=models,
                     run=run, resolved=resolved)


def _new_parser():
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive
    return parser


def _apply_overrides(parser, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        if "." not in lhs:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, key = lhs.strip().rsplit(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = value.strip()


def _read(parser, text, source):
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from None


def load_config(path, overrides=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    parser = _new_parser()
    _read(parser, text, str(path))
    _apply_overrides(parser, overrides)
    return parse_config(parser, base_dir=path.parent)


def _preset_dir():
    return resources.files("optocollapse").joinpath("presets")


def list_presets():
    return sorted(p.name[:-4] for p in _preset_dir().iterdir()
                  if p.name.endswith(".ini"))


def load_preset_config(name, overrides=None):
    ref = _preset_dir().joinpath(f"{name}.ini")
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    parser = _new_parser()
    _read(parser, ref.read_text(), f"preset {name}")
    _apply_overrides(parser, overrides)
    return parse_config(parser)
