"""Flat ``[section]`` / ``key = value`` run configuration.

Every key has a type, a default (``REQUIRED`` when it has none) and an
optional range check.  Parsing collects all problems, each tagged with its
line number, before raising a single :class:`ConfigError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

REQUIRED = object()


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(options)}"

    return check


def _open01(v):
    return None if 0.0 < v < 1.0 else "must lie in (0,1)"


def _alpha(v):
    return None if 0.0 < v <= 1.0 else "must lie in (0,1]"


def _positive(v):
    return None if v > 0.0 else "must be positive"


def _nonneg(v):
    return None if v >= 0.0 else "must be non-negative"


def _unit(v):
    return None if 0.0 <= v <= 1.0 else "must lie in [0,1]"


def _theta(v):
    return None if 0.5 <= v <= 1.0 else "must lie in [0.5,1]"


def _min_int(n):
    def check(v):
        return None if v >= n else f"must be at least {n}"

    return check


def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default, check, help)
SCHEMA = {
    "reaction": {
        "kind": (str, REQUIRED, _choice("cubic", "holder_bistable", "user_table"), "reaction family"),
        "s0": (float, REQUIRED, _open01, "middle zero of f"),
        "alpha0": (float, 0.5, _alpha, "Hölder exponent at 0 (holder_bistable)"),
        "alpha1": (float, None, _alpha, "Hölder exponent at 1 (defaults to alpha0)"),
        "table": (str, None, None, "CSV with columns s,f (user_table)"),
    },
    "wave": {
        "tol": (float, 1e-8, _positive, "bisection tolerance on c"),
        "n_nodes": (int, 2048, _min_int(64), "shooting grid nodes"),
        "balance_tol": (float, 1e-10, _positive, "|y(1)| accepted as balanced"),
        "bracket_lo": (float, None, _nonneg, "initial lower speed bracket"),
        "bracket_hi": (float, None, _positive, "initial upper speed bracket"),
    },
    "domain": {
        "z_min": (float, -40.0, None, "left end of the moving-frame domain"),
        "z_max": (float, 40.0, None, "right end"),
        "n_cells": (int, 8000, _min_int(4), "number of grid cells"),
    },
    "scheme": {
        "scheme": (str, "imex_fd", _choice("imex_fd", "splitting_green"), "time stepper"),
        "dt": (float, 0.002, _positive, "time step"),
        "theta": (float, 0.5, _theta, "implicitness of imex_fd"),
        "kernel_cutoff_sigmas": (float, 8.0, _positive, "kernel truncation (splitting_green)"),
        "t_end": (float, 60.0, _nonneg, "final time"),
        "snapshot_every": (float, 0.1, _positive, "snapshot spacing"),
    },
    "initial_data": {
        "kind": (str, "step", _choice("step", "smoothed_step", "profile_perturbation", "table"), "initial data"),
        "at": (float, 0.0, None, "step position"),
        "width": (float, 1.0, _positive, "smoothed_step width"),
        "epsilon": (float, 0.01, _nonneg, "profile_perturbation amplitude"),
        "shift": (float, 0.0, None, "profile_perturbation translate"),
        "left": (float, 0.0, _unit, "left plateau"),
        "right": (float, 1.0, _unit, "right plateau"),
        "table": (str, None, None, "CSV with columns z and v (or U)"),
    },
    "diagnostics": {
        "eta": (float, 0.05, _positive, "envelope margin"),
        "interval_min": (float, None, None, "energy interval override (left)"),
        "interval_max": (float, None, None, "energy interval override (right)"),
        "stability": (_bool, False, None, "run the perturbation probe"),
        "stability_t_end": (float, 20.0, _positive, "probe run length"),
    },
    "output": {
        "dir": (str, "out", None, "output directory"),
        "trajectory_format": (str, "binary", _choice("binary", "csv", "none"), "trajectory file format"),
    },
    "sweep": {
        "parameter": (str, "s0", _choice("s0", "alpha", "alpha0", "alpha1"), "swept parameter"),
        "values": (_floats, [0.6, 0.7, 0.8, 0.9], None, "comma separated values"),
    },
}


@dataclass
class RunConfig:
    reaction: dict = field(default_factory=dict)
    wave: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    initial_data: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def reaction_spec(self):
        from .reaction import ReactionSpec

        r = self.reaction
        if r["kind"] == "cubic":
            return ReactionSpec.cubic(r["s0"])
        if r["kind"] == "holder_bistable":
            a1 = r["alpha0"] if r["alpha1"] is None else r["alpha1"]
            return ReactionSpec.holder(r["s0"], r["alpha0"], a1)
        from .io import read_csv

        _, cols = read_csv(r["table"])
        return ReactionSpec.from_table(cols["s"], cols["f"], r["s0"])

    def wave_control(self):
        from .wave import WaveControl

        return WaveControl(n_nodes=self.wave["n_nodes"], balance_tol=self.wave["balance_tol"])

    def bracket(self):
        lo, hi = self.wave["bracket_lo"], self.wave["bracket_hi"]
        return None if lo is None or hi is None else (lo, hi)

    def domain_obj(self):
        from .pde import Domain

        d = self.domain
        return Domain(d["z_min"], d["z_max"], d["n_cells"])

    def scheme_ctrl(self):
        from .pde import SchemeCtrl

        s = self.scheme
        return SchemeCtrl(s["scheme"], s["dt"], s["theta"], s["kernel_cutoff_sigmas"])

    def initial(self):
        from .pde import InitialData

        d = self.initial_data
        tz = tv = None
        if d["kind"] == "table":
            from .io import read_csv

            _, cols = read_csv(d["table"])
            tz = tuple(cols["z"])
            tv = tuple(cols["v"] if "v" in cols else cols["U"])
        return InitialData(
            d["kind"], d["at"], d["width"], d["epsilon"], d["shift"], d["left"], d["right"], tz, tv
        )

    def interval(self):
        a, b = self.diagnostics["interval_min"], self.diagnostics["interval_max"]
        return None if a is None or b is None else (a, b)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    errors = []
    values: dict = {name: {} for name in SCHEMA}
    lines_of: dict = {}
    seen = set()
    headers: dict = {}
    n_lines = max(1, len(text.splitlines()))
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            headers.setdefault(section, lineno)
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
                section = "__skip__"
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value")
            continue
        if section is None:
            errors.append(f"line {lineno}: key outside of any [section]")
            continue
        if section == "__skip__":
            continue
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA[section]:
            errors.append(f"line {lineno}: unknown key '{key}' in [{section}]")
            continue
        if (section, key) in seen:
            errors.append(f"line {lineno}: duplicate key '{key}' in [{section}]")
            continue
        seen.add((section, key))
        parse, _, check, _ = SCHEMA[section][key]
        try:
            parsed = parse(val)
        except ValueError:
            errors.append(f"line {lineno}: {key} = {val!r} is not a valid {getattr(parse, '__name__', 'value')}")
            continue
        if isinstance(parsed, float) and not math.isfinite(parsed):
            errors.append(f"line {lineno}: {key} must be finite")
            continue
        msg = check(parsed) if check else None
        if msg:
            errors.append(f"line {lineno}: {key} {msg}")
            continue
        values[section][key] = parsed
        lines_of[(section, key)] = lineno

    for name, keys in SCHEMA.items():
        for key, (_, default, _, _) in keys.items():
            if key not in values[name]:
                if default is REQUIRED:
                    if (name, key) not in seen:
                        where = headers.get(name, n_lines)
                        errors.append(f"line {where}: missing required key '{key}' in [{name}]")
                    continue
                values[name][key] = default
    cfg = RunConfig(**values)
    bad = {sk for sk in seen if sk not in lines_of}
    _cross_checks(cfg, lines_of, errors, bad)
    if errors:
        errors.sort(key=lambda e: int(e.split(":", 1)[0].split()[1]))
        raise ConfigError(errors[0] if len(errors) == 1 else f"{len(errors)} configuration errors", errors)
    return cfg


def _cross_checks(cfg: RunConfig, lines_of, errors, bad):
    """Checks spanning several keys; skipped when an input key is itself invalid."""

    def line(section, key):
        return lines_of.get((section, key), 0)

    def usable(*keys):
        return not any(k in bad for k in keys)

    r = cfg.reaction
    reaction_ok = usable(*(("reaction", k) for k in SCHEMA["reaction"])) and "kind" in r and "s0" in r
    if reaction_ok and r["kind"] == "user_table" and not r["table"]:
        errors.append(f"line {line('reaction', 'kind')}: user_table requires a table path")
        reaction_ok = False
    d = cfg.domain
    if usable(("domain", "z_min"), ("domain", "z_max")) and not d["z_min"] < d["z_max"]:
        errors.append(f"line {line('domain', 'z_max')}: z_min must be less than z_max")
    w = cfg.wave
    if w["bracket_lo"] is not None and w["bracket_hi"] is not None and not w["bracket_lo"] < w["bracket_hi"]:
        errors.append(f"line {line('wave', 'bracket_hi')}: bracket_lo must be less than bracket_hi")
    i = cfg.initial_data
    if usable(("initial_data", "kind")) and i["kind"] == "table" and not i["table"]:
        errors.append(f"line {line('initial_data', 'kind')}: table initial data requires a table path")
    if not reaction_ok:
        return
    from .reaction import max_slope

    try:
        spec = cfg.reaction_spec()
    except (ConfigError, OSError, KeyError) as exc:
        errors.append(f"line {line('reaction', 'kind')}: {exc}")
        return
    if usable(("scheme", "dt")):
        slope = max_slope(spec)
        dt = cfg.scheme["dt"]
        if dt * slope > 0.5:
            errors.append(
                f"line {line('scheme', 'dt')}: dt violates the stability guard "
                f"dt*max_slope(f) <= 0.5 (dt={dt:g}, max_slope={slope:.6g})"
            )
    if usable(("diagnostics", "eta")):
        eta = cfg.diagnostics["eta"]
        bound = min(spec.s0, 1.0 - spec.s0) / 3.0
        if not eta < bound:
            errors.append(
                f"line {line('diagnostics', 'eta')}: eta must satisfy eta < min(s0,1-s0)/3 = {bound:.6g}"
            )


def defaults_help() -> str:
    """Human-readable listing of every key with its default."""
    out = []
    for name, keys in SCHEMA.items():
        out.append(f"[{name}]")
        for key, (_, default, _, text) in keys.items():
            shown = "(required)" if default is REQUIRED else ("(unset)" if default is None else default)
            if isinstance(shown, list):
                shown = ", ".join(f"{x:g}" for x in shown)
            out.append(f"  {key} = {shown}    {text}")
    return "\n".join(out)
