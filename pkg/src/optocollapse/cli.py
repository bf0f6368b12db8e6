"""Command-line front end.

Subcommands ``plan``, ``witness``, ``decohere`` and ``simulate`` read an INI
configuration (a path or ``--preset NAME``) and write a report or CSV.
Every output starts with ``#`` comment lines recording the resolved
configuration.  Exit codes: 0 success, 1 usage or configuration error,
2 a requested physics verdict failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from .config import ConfigError, list_presets, load_config, load_preset_config
from .decoherence import (
    NoDecoherenceError,
    PhaseKernel,
    Standard,
    doubling_time,
    dp_discriminator,
    quadrature_moments,
    xi,
)
from .feasibility import plan
from .protocol_sim import ProtocolConfig, run_protocol
from .witness import WitnessInputs, min_alpha_squared, thermal_oracle, witness_analytic, witness_fock_oracle

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2
FLOAT_FMT = "%.17g"
SWEEP_VARS = ("alpha_sq", "g0tau", "n_th", "delta_x", "sigma_lo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _header(fh, cfg, command):
    fh.write(f"# optocollapse {__version__} {command}\n")
    for line in cfg.header_lines():
        fh.write(f"# {line}\n")


def _write_rows(fh, columns, rows):
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------- plan


def cmd_plan(cfg, args):
    rep = plan(cfg.system, cfg.models, cfg.temperature, cfg.q_factor, cfg.limits)
    required = cfg.run["require"] or list(rep.verdicts)
    missing = [r for r in required if r not in rep.verdicts]
    if missing:
        raise ConfigError(f"[run] require names unknown verdict(s): {', '.join(missing)}; "
                          f"available: {', '.join(rep.verdicts)}")
    with _open_out(args.output) as fh:
        _header(fh, cfg, "plan")
        fh.write(rep.render())
    if args.json:
        doc = {"config": cfg.resolved, "report": _jsonable(rep.as_dict()), "required": required}
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if all(rep.verdicts[r] for r in required) else EXIT_VERDICT


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------- witness


def _sweep_values(run, default_range):
    start = run["sweep_start"] if run["sweep_start"] is not None else default_range[0]
    stop = run["sweep_stop"] if run["sweep_stop"] is not None else default_range[1]
    num = run["sweep_num"]
    if num < 1:
        raise ConfigError("[run] sweep_num must be >= 1")
    if run["sweep_scale"] == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("[run] log sweeps need positive bounds")
        return np.geomspace(start, stop, num)
    return np.linspace(start, stop, num)


def cmd_witness(cfg, args):
    run, p = cfg.run, cfg.system
    var = run["sweep_var"]
    if var not in SWEEP_VARS:
        raise ConfigError(f"[run] sweep_var must be one of {', '.join(SWEEP_VARS)}")
    g0tau = run["witness_g0tau"] if run["witness_g0tau"] is not None else p.g0tau
    a_sq = run["witness_alpha_sq"] if run["witness_alpha_sq"] is not None else p.alpha**2
    base = dict(g0tau=g0tau, alpha=math.sqrt(a_sq), t=run["witness_t_s"], n_th=p.n_th,
                delta_x=run["delta_x_x0"], sigma_lo=run["sigma_lo_rad"], omega_m=p.omega_m)
    defaults = {"alpha_sq": (0.0, 4.0 * min_alpha_squared(g0tau)), "g0tau": (0.01, 0.4),
                "n_th": (0.0, 10.0), "delta_x": (0.0, 2.0), "sigma_lo": (0.0, 4.0 * g0tau)}
    values = _sweep_values(run, defaults[var])
    cutoff = run["cutoff"]
    columns = ["sweep_var", "lhs", "rhs", "margin", "violated"]
    if cutoff is not None:
        columns.append("oracle_margin")
    rows = []
    for v in values:
        fields = dict(base)
        if var == "alpha_sq":
            if v < 0:
                raise ConfigError("[run] alpha_sq sweep must be >= 0")
            fields["alpha"] = math.sqrt(v)
        else:
            fields[var] = float(v)
        inp = WitnessInputs(**fields)
        rep = witness_analytic(inp)
        row = [float(v), rep.lhs, rep.rhs, rep.margin, rep.violated]
        if cutoff is not None:
            oracle = (witness_fock_oracle(inp, cutoff=cutoff) if inp.n_th == 0
                      else thermal_oracle(inp, cutoff=cutoff, seed=run["seed"]))
            row.append(oracle.margin)
        rows.append(row)
    with _open_out(args.output) as fh:
        _header(fh, cfg, "witness")
        fh.write(f"# sweep_var = {var}\n")
        _write_rows(fh, columns, rows)
    return EXIT_OK


# ---------------------------------------------------------------- decohere


def cmd_decohere(cfg, args):
    if not cfg.models:
        raise ConfigError("decohere needs at least one [model.NAME] section")
    p, run = cfg.system, cfg.run
    alpha = p.alpha
    columns = ["model", "k", "eta", "xi", "mean_theta0", "var_theta_pi2", "ratio_xi2_xi1_4"]
    rows, notes = [], []
    for name, model in cfg.models.items():
        for k in run["k_values"]:
            ker = PhaseKernel(model, k, p.omega_m, p.g0tau, p.x0)
            mean0, _ = quadrature_moments(ker, alpha, 0.0)
            m_pi2, s_pi2 = quadrature_moments(ker, alpha, 0.5 * math.pi)
            try:
                ratio = dp_discriminator(ker)
            except FloatingPointError:
                ratio = math.nan
            for eta in run["eta_values"]:
                rows.append([name, k, eta, xi(ker, eta), mean0, s_pi2 - m_pi2**2, ratio])
        try:
            dt = doubling_time(model, alpha, p.g0tau, p.x0, p.omega_m)
            notes.append(f"# doubling_time {name}: closed_form_s={_fmt(dt.closed_form)} "
                         f"t_exact_s={_fmt(dt.t_exact)} k_exact={_fmt(dt.k_exact)} "
                         f"k_rounded={dt.k_rounded} t_rounded_s={_fmt(dt.t_rounded)}")
        except (NoDecoherenceError, ValueError) as exc:
            notes.append(f"# doubling_time {name}: {exc}")
    with _open_out(args.output) as fh:
        _header(fh, cfg, "decohere")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(row[0] + "," + ",".join(_fmt(v) for v in row[1:]) + "\n")
        for line in notes:
            fh.write(line + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(cfg, args):
    run = cfg.run
    if run["model"] is not None:
        model = cfg.models[run["model"]]
    elif len(cfg.models) == 1:
        model = next(iter(cfg.models.values()))
    elif not cfg.models:
        model = Standard(0.0)
    else:
        raise ConfigError("[run] model must name one of the [model.*] sections")
    conf = ProtocolConfig(params=cfg.system, model=model, k=run["k"], theta=run["theta_rad"],
                          shots=run["shots"], seed=run["seed"], delta_x=run["delta_x_x0"],
                          sigma_lo=run["sigma_lo_rad"], workers=run["workers"])
    rec, est = run_protocol(conf)
    mean_pred, second_pred = quadrature_moments(conf.kernel(), cfg.system.alpha, conf.theta)
    n = len(rec)
    table = np.column_stack([np.arange(n, dtype=np.float64), rec.phi_deco, rec.x_meas,
                             rec.phi_feedback, rec.outcome])
    with _open_out(args.output) as fh:
        _header(fh, cfg, "simulate")
        fh.write("shot_index,phi_deco_rad,x_meas_x0,phi_feedback_rad,outcome\n")
        np.savetxt(fh, table, fmt=["%d"] + [FLOAT_FMT] * 4, delimiter=",")
        fh.write("# summary\n")
        for key in ("mean", "second_moment", "variance", "std_error_mean", "std_error_var"):
            fh.write(f"# {key} = {_fmt(getattr(est, key))}\n")
        fh.write(f"# shots = {est.shots}\n")
        fh.write(f"# predicted_mean = {_fmt(mean_pred)}\n")
        fh.write(f"# predicted_variance_no_readout_noise = {_fmt(second_pred - mean_pred**2)}\n")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


COMMANDS = {"plan": cmd_plan, "witness": cmd_witness, "decohere": cmd_decohere,
            "simulate": cmd_simulate}


def build_parser():
    parser = _Parser(prog="optocollapse",
                     description="Optomechanical entanglement and decoherence toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("config", nargs="?", help="INI configuration file")
        src.add_argument("--preset", help=f"bundled preset ({', '.join(list_presets())})")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a configuration key")
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        sp.add_argument("--workers", type=int, help="worker threads (simulate)")
        if name == "plan":
            sp.add_argument("--json", help="also write the report as JSON to this path")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        overrides = list(args.overrides)
        if args.workers is not None:
            overrides.append(f"run.workers={args.workers}")
        cfg = (load_preset_config(args.preset, overrides) if args.preset
               else load_config(args.config, overrides))
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"optocollapse: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as exc:
        print(f"optocollapse: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # never a traceback for bad input
        print(f"optocollapse: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
