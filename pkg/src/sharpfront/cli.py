"""Command line entry point: ``sharpfront <subcommand> --config run.cfg``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import RunConfig, defaults_help, parse_config
from .errors import ConfigError, ConvergenceError, SharpFrontError
from .io import dumps_json, write_csv, write_json
from .pde import (
    check_guards,
    read_trajectory_binary,
    read_trajectory_csv,
    run,
    trajectory_csv,
    write_trajectory_binary,
)
from .profile import eval_profile, front_width, reconstruct_profile
from .reaction import ReactionSpec, check_hypotheses
from .wave import solve_speed, speed_lower_bound

log = logging.getLogger("sharpfront")

EXIT_OK = 0


def _load(args) -> RunConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = parse_config(text)
    if args.out:
        cfg.output["dir"] = args.out
    return cfg


def _out(cfg, name) -> Path:
    return Path(cfg.output["dir"]) / name


def _emit(cfg, name, obj):
    write_json(_out(cfg, name), obj)
    sys.stdout.write(dumps_json(obj))


def _speed(cfg, spec=None):
    spec = spec or cfg.reaction_spec()
    return spec, solve_speed(spec, cfg.bracket(), cfg.wave["tol"], cfg.wave_control())


def cmd_hypotheses(cfg, args):
    spec = cfg.reaction_spec()
    report = check_hypotheses(spec, eta=cfg.diagnostics["eta"])
    _emit(cfg, "hypotheses.json", report.to_dict())
    return 2 if not report.ok else EXIT_OK


def cmd_speed(cfg, args):
    spec, res = _speed(cfg)
    out = res.to_dict()
    out["lower_bound"] = speed_lower_bound(spec)
    if args.format == "json":
        out["y"] = {"r": res.y.r_grid, "y": res.y.y_values}
    else:
        write_csv(_out(cfg, "y.csv"), ["r", "y"], [res.y.r_grid, res.y.y_values])
    _emit(cfg, "speed.json", out)
    return EXIT_OK


def _profile_summary(table):
    return {
        "c_star": table.c_star,
        "z0": table.z0,
        "z1": table.z1,
        "width": front_width(table),
        "tail_diagnostics": table.diagnostics,
    }


def cmd_profile(cfg, args):
    spec, res = _speed(cfg)
    table = reconstruct_profile(spec, res)
    z = cfg.domain_obj().z
    u = eval_profile(table, z)
    out = _profile_summary(table)
    if args.format == "json":
        out["profile"] = {"z": z, "U": u}
    else:
        write_csv(_out(cfg, "profile.csv"), ["z", "U"], [z, u])
    _emit(cfg, "profile.json", out)
    return EXIT_OK


def _write_series(cfg, args, track, samples, report):
    if track is not None:
        cols = [track.t, track.zeta, track.sup_dist]
        if args.format == "json":
            report["shift_series"] = {"t": cols[0], "zeta": cols[1], "sup_dist": cols[2]}
        else:
            write_csv(_out(cfg, "shift.csv"), ["t", "zeta", "sup_dist"], cols)
    if samples is not None:
        cols = [[s.t for s in samples], [s.E for s in samples], [s.dissipation for s in samples]]
        cols[2] = [0.0 if math.isnan(x) else x for x in cols[2]]
        if args.format == "json":
            report["lyapunov_series"] = {"t": cols[0], "E": cols[1], "dissipation": cols[2]}
        else:
            write_csv(_out(cfg, "lyapunov.csv"), ["t", "E", "dissipation"], cols)


def _diagnose(cfg, args, spec, table, traj, v0):
    """Envelope, energy and shift diagnostics shared by ``simulate`` and ``diagnose``."""
    report = {"snapshots": len(traj), "t_end": traj.times[-1], "clamp_max": traj.clamp_max}
    eta = cfg.diagnostics["eta"]
    try:
        params = dg.build_envelopes(spec, table, traj.z, v0, eta)
        report["envelopes"] = params.to_dict()
        report["comparison_max_violation"] = dg.check_comparison(traj, params, table)
    except SharpFrontError as exc:
        report["envelopes"] = None
        report["envelope_error"] = str(exc)
    track = samples = None
    if len(traj) >= 10:
        stability = None
        if cfg.diagnostics["stability"]:
            stability = dg.stability_probe(
                spec, table, traj.domain, cfg.scheme_ctrl(), t_end=cfg.diagnostics["stability_t_end"]
            )
        conv, track, samples = dg.convergence_report(traj, table, spec, stability)
        if cfg.interval() is not None:
            samples = dg.lyapunov_series(traj, spec, interval=cfg.interval())
            conv["lyapunov"] = dg.lyapunov_summary(samples)
            conv["lyapunov_ok"] = conv["lyapunov"]["non_increasing"]
        report["convergence"] = conv
    else:
        report["convergence"] = None
        report["note"] = "fewer than 10 snapshots: convergence diagnostics skipped"
    _write_series(cfg, args, track, samples, report)
    return report


def cmd_simulate(cfg, args):
    spec, res = _speed(cfg)
    table = reconstruct_profile(spec, res)
    domain = cfg.domain_obj()
    ctrl = cfg.scheme_ctrl()
    check_guards(spec, res.c_star, domain, ctrl)
    v0 = cfg.initial().resolve(domain, table)
    eta = cfg.diagnostics["eta"]
    sc = cfg.scheme
    traj = run(spec, res.c_star, domain, v0, ctrl, sc["t_end"], sc["snapshot_every"], eta=eta)
    fmt = cfg.output["trajectory_format"]
    if fmt == "binary":
        write_trajectory_binary(_out(cfg, "trajectory.bin"), traj)
    elif fmt == "csv":
        from .io import atomic_write

        atomic_write(_out(cfg, "trajectory.csv"), trajectory_csv(traj))
    report = {"c_star": res.c_star, "scheme": dataclasses.asdict(ctrl), "aborted": traj.aborted}
    if traj.aborted:
        report["message"] = traj.message
    report.update(_diagnose(cfg, args, spec, table, traj, v0))
    _emit(cfg, "report.json", report)
    if traj.aborted:
        raise ConvergenceError(traj.message)
    return EXIT_OK


def cmd_diagnose(cfg, args):
    if not args.trajectory:
        raise ConfigError("diagnose requires --trajectory PATH")
    spec, res = _speed(cfg)
    table = reconstruct_profile(spec, res)
    path = Path(args.trajectory)
    if path.suffix == ".csv":
        traj = read_trajectory_csv(path, res.c_star)
    else:
        traj = read_trajectory_binary(path, res.c_star)
    report = {"c_star": res.c_star, "trajectory": str(path)}
    report.update(_diagnose(cfg, args, spec, table, traj, traj.snapshots[0]))
    _emit(cfg, "diagnose.json", report)
    return EXIT_OK


def _swept_spec(base: ReactionSpec, parameter, value):
    if parameter == "s0":
        return dataclasses.replace(base, s0=value)
    if base.kind != "holder_bistable":
        raise ConfigError("exponent sweeps need kind = holder_bistable")
    if parameter == "alpha":
        return ReactionSpec.holder(base.s0, value, value)
    if parameter == "alpha0":
        return ReactionSpec.holder(base.s0, value, base.alpha1)
    return ReactionSpec.holder(base.s0, base.alpha0, value)


def cmd_sweep(cfg, args):
    base = cfg.reaction_spec()
    parameter = cfg.sweep["parameter"]
    values, speeds, residuals = [], [], []
    for value in cfg.sweep["values"]:
        spec = _swept_spec(base, parameter, value)
        _, res = _speed(cfg, spec)
        values.append(value)
        speeds.append(res.c_star)
        residuals.append(res.identity_residual)
    out = {"parameter": parameter, "rows": [
        {parameter: v, "c_star": c, "identity_residual": r} for v, c, r in zip(values, speeds, residuals)
    ]}
    if args.format != "json":
        write_csv(_out(cfg, "sweep.csv"), [parameter, "c_star", "identity_residual"], [values, speeds, residuals])
    _emit(cfg, "sweep.json", out)
    return EXIT_OK


COMMANDS = {
    "hypotheses": (cmd_hypotheses, "check the structural hypotheses on f"),
    "speed": (cmd_speed, "compute the wave speed and y(r)"),
    "profile": (cmd_profile, "tabulate the wave profile and its front ends"),
    "simulate": (cmd_simulate, "run the moving-frame PDE and its diagnostics"),
    "diagnose": (cmd_diagnose, "diagnostics for a stored trajectory"),
    "sweep": (cmd_sweep, "wave speed over a parameter grid"),
}


def build_parser():
    epilog = "configuration keys and defaults:\n" + defaults_help() + (
        "\n\nexit codes: 0 success, 2 hypothesis violation, 3 non-convergence, 4 configuration error"
    )
    parser = argparse.ArgumentParser(
        prog="sharpfront",
        description="Travelling waves and front dynamics for bistable reaction-diffusion.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="tables as CSV files next to the JSON summary, or inline JSON")
        p.add_argument("--seedless", action="store_true",
                       help="accepted for compatibility; every run is deterministic")
        if name == "diagnose":
            p.add_argument("--trajectory", help="trajectory file (.bin or .csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    np.seterr(all="ignore")
    try:
        cfg = _load(args)
        return COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return exc.exit_code
    except SharpFrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
