"""Command line front end.

One subcommand per estimator plus ``report``.  Output is JSON lines, one
record per logical result, each carrying the fully resolved configuration
so a record can be reproduced from itself.  Nothing time- or host-
dependent is emitted: a fixed seed gives byte-identical reruns.

Configuration precedence: explicit flags > ``--config`` file (flat
``key=value`` lines, ``#`` comments) > built-in defaults.  The seed
default can also come from the ``FRACRIG_SEED`` environment variable.

Exit status: 0 on success, 1 if ``report`` finds a failed bound, 2 for
invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .experiments import (BUDGETS, ConstantMode, axial_escape_check,
                          estimate_constant, estimate_loss, full_report)
from .geometry import BallSpec, CylinderSpec, INFINITE, load_trace, save_trace
from .potential import WosConfig, capacity_estimate, kappa_estimate, torsion_value
from .spectral import (DiscSpectrum, IntervalSpectrum, bessel_zeros,
                       disc_heat_content, interval_heat_content,
                       rigidity_cylinder, rigidity_disc)
from .stochastic import PathConfig, RngStream, StartMode, sample_start, sample_trace

DEFAULT_SEED = 12345

__all__ = ["main"]


class CliError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise CliError(f"not a boolean: {text!r}")


def _coerce(key: str, kind, text: str):
    try:
        if kind is bool:
            return _parse_bool(text)
        return kind(text)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad value for {key}: {text!r}") from exc


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    return out


def _resolve(args, spec: dict) -> dict:
    """Merge defaults, config file and flags; returns the final mapping."""
    resolved = {key: default for key, (_, default) in spec.items()}
    if args.config:
        for key, text in _read_config_file(args.config).items():
            if key not in spec:
                raise CliError(f"unknown config key {key!r} for this command")
            resolved[key] = _coerce(key, spec[key][0], text)
    for key in spec:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            resolved[key] = flag
    for key, value in resolved.items():
        if isinstance(value, float) and not (math.isfinite(value)
                                             or value == INFINITE):
            raise CliError(f"{key} must be finite (or inf where allowed)")
    return resolved


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class _Emitter:
    def __init__(self, out_path: str | None):
        self._path = out_path
        self._fh = None

    def __enter__(self):
        self._fh = sys.stdout if not self._path or self._path == "-" \
            else open(self._path, "w")
        return self

    def __exit__(self, *exc):
        if self._fh is not sys.stdout:
            self._fh.close()
        return False

    def emit(self, command: str, config: dict, **payload):
        # destination paths are not part of the result identity; leaving
        # them out keeps reruns byte-comparable across output locations
        echo = {k: v for k, v in config.items() if k not in ("out", "csv")}
        record = {"command": command, "version": __version__,
                  "config": _jsonable(echo)}
        record.update(_jsonable(payload))
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")


def _estimate_payload(est) -> dict:
    return {"mean": est.mean, "std_error": est.std_error, "n": est.n}


def _floats(text: str, want: int | None = None) -> list[float]:
    try:
        vals = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise CliError(f"bad number list: {text!r}") from exc
    if want is not None and len(vals) != want:
        raise CliError(f"expected {want} comma-separated numbers: {text!r}")
    return vals


def _start_mode(name: str) -> StartMode:
    try:
        return StartMode(name)
    except ValueError:
        valid = ", ".join(m.value for m in StartMode)
        raise CliError(f"unknown start mode {name!r} (choose from {valid})")


def _wos_config(cfg: dict) -> WosConfig:
    return WosConfig(eps_shell=cfg["eps-shell"], eps_tube=cfg["eps-tube"],
                     launch_radius=cfg.get("launch-radius"))


# ---------------------------------------------------------------------------
# subcommand implementations; each returns the process exit status

_SPECS = {
    "zeros": {"n": (int, 10)},
    "heat-content": {"domain": (str, "disc"), "R": (float, 1.0),
                     "L": (float, 1.0), "t": (str, "1.0")},
    "rigidity": {"L": (float, 10.0), "R": (float, 1.0), "disc": (bool, False)},
    "trace": {"L": (float, 12.0), "R": (float, 1.0), "ball-r": (float, None),
              "start": (str, "uniform"), "dt": (float, None),
              "save": (str, None)},
    "torsion": {"point": (str, "0,0,0"), "L": (float, INFINITE),
                "R": (float, 1.0), "n-walks": (int, 10000),
                "trace": (str, None), "eps-tube": (float, 0.04),
                "eps-shell": (float, 1e-3)},
    "capacity": {"trace": (str, None), "ball-r": (float, None),
                 "n-walkers": (int, 10000), "eps-tube": (float, 0.04),
                 "eps-shell": (float, 1e-3), "launch-radius": (float, None)},
    "kappa": {"n-traces": (int, 256), "n-walkers": (int, 512),
              "ball-radius": (float, 1.0), "eps-tube": (float, 0.04)},
    "loss": {"L": (float, 12.0), "R": (float, 1.0), "start": (str, "uniform"),
             "n-traces": (int, 96), "n-points": (int, 4096),
             "eps-tube": (float, 0.04)},
    "constant": {"mode": (str, "C"), "n-traces": (int, 160),
                 "n-points": (int, 2048), "eps-tube": (float, 0.04)},
    "escape": {"L": (float, 16.0), "R": (float, 1.0),
               "n-paths": (int, 40000)},
    "report": {"budget": (str, "default"), "csv": (str, None)},
}


def _cmd_zeros(cfg, stream, em, workers):
    if cfg["n"] < 1:
        raise CliError("n must be >= 1")
    zs = bessel_zeros(cfg["n"])
    em.emit("zeros", cfg, zeros=[float(z) for z in zs])
    return 0


def _cmd_heat_content(cfg, stream, em, workers):
    times = _floats(cfg["t"])
    if cfg["domain"] == "disc":
        spec = DiscSpectrum(radius=cfg["R"])
        fn, label = disc_heat_content, {"R": cfg["R"]}
    elif cfg["domain"] == "interval":
        spec = IntervalSpectrum(length=cfg["L"])
        fn, label = interval_heat_content, {"L": cfg["L"]}
    else:
        raise CliError(f"unknown domain {cfg['domain']!r} "
                       "(choose disc or interval)")
    for t in times:
        sv = fn(t, spec)
        em.emit("heat-content", cfg, t=t, value=sv.value, n_terms=sv.n_terms,
                tail_bound=sv.tail_bound, **label)
    return 0


def _cmd_rigidity(cfg, stream, em, workers):
    if cfg["disc"]:
        em.emit("rigidity", cfg, value=rigidity_disc(cfg["R"]), n_terms=0,
                tail_bound=0.0)
    else:
        sv = rigidity_cylinder(cfg["L"], cfg["R"])
        em.emit("rigidity", cfg, value=sv.value, n_terms=sv.n_terms,
                tail_bound=sv.tail_bound)
    return 0


def _cmd_trace(cfg, stream, em, workers):
    if cfg["ball-r"] is not None:
        domain = BallSpec(cfg["ball-r"])
        dt = cfg["dt"] if cfg["dt"] is not None else 1e-4 * cfg["ball-r"] ** 2
    else:
        domain = CylinderSpec(radius=cfg["R"], length=cfg["L"])
        dt = cfg["dt"] if cfg["dt"] is not None else 1e-4 * cfg["R"] ** 2
    start = sample_start(domain, _start_mode(cfg["start"]), stream.child(0))[0]
    trace = sample_trace(domain, start, PathConfig(dt=dt), stream.child(1))
    if cfg["save"]:
        save_trace(cfg["save"], trace)
    lo, hi = trace.axial_extent()
    em.emit("trace", cfg, n_vertices=int(trace.vertices.shape[0]),
            n_segments=trace.n_segments, dt=dt,
            start=[float(v) for v in start],
            exit=[float(v) for v in trace.vertices[-1]],
            axial_extent=[lo, hi],
            file=cfg["save"])
    return 0


def _cmd_torsion(cfg, stream, em, workers):
    x = _floats(cfg["point"], 3)
    domain = CylinderSpec(radius=cfg["R"], length=cfg["L"])
    obstacle = load_trace(cfg["trace"]) if cfg["trace"] else None
    est = torsion_value(x, domain, cfg["n-walks"], _wos_config(cfg), stream,
                        obstacle=obstacle)
    em.emit("torsion", cfg, x=x, **_estimate_payload(est))
    return 0


def _cmd_capacity(cfg, stream, em, workers):
    if (cfg["trace"] is None) == (cfg["ball-r"] is None):
        raise CliError("give exactly one obstacle: --trace or --ball-r")
    obstacle = load_trace(cfg["trace"]) if cfg["trace"] \
        else BallSpec(cfg["ball-r"])
    est = capacity_estimate(obstacle, cfg["n-walkers"], _wos_config(cfg),
                            stream)
    em.emit("capacity", cfg, **_estimate_payload(est))
    return 0


def _cmd_kappa(cfg, stream, em, workers):
    res = kappa_estimate(stream, cfg["n-traces"], cfg["n-walkers"],
                         ball_radius=cfg["ball-radius"],
                         eps0=cfg["eps-tube"], workers=workers)
    for eps, est in res.at_eps:
        em.emit("kappa", cfg, level="tube", eps=eps,
                **_estimate_payload(est))
    em.emit("kappa", cfg, level="extrapolated",
            launch_radius=res.launch_radius, dt=res.dt,
            **_estimate_payload(res.extrapolated))
    return 0


def _cmd_loss(cfg, stream, em, workers):
    mode = _start_mode(cfg["start"])
    le = estimate_loss(cfg["L"], cfg["R"], mode, stream, cfg["n-traces"],
                       cfg["n-points"], eps_tube=cfg["eps-tube"],
                       workers=workers)
    em.emit("loss", cfg, mode=mode.value, exact_rigidity=le.exact_rigidity,
            fractured=_estimate_payload(le.fractured),
            **_estimate_payload(le.value))
    return 0


def _cmd_constant(cfg, stream, em, workers):
    try:
        mode = ConstantMode(cfg["mode"])
    except ValueError:
        raise CliError("mode must be C or CPRIME")
    ce = estimate_constant(mode, stream, cfg["n-traces"], cfg["n-points"],
                           eps_tube=cfg["eps-tube"], workers=workers)
    em.emit("constant", cfg, mode=mode.value,
            censored_fraction=ce.censored_fraction,
            truncation_bound=ce.truncation_bound,
            window_bias_scale=ce.window_bias_scale,
            truncation_length=ce.truncation_length, window=ce.window,
            **_estimate_payload(ce.value))
    return 0


def _cmd_escape(cfg, stream, em, workers):
    entry = axial_escape_check(cfg["L"], cfg["R"], cfg["n-paths"], stream)
    em.emit("escape", cfg, **entry.as_dict())
    return 0


def _cmd_report(cfg, stream, em, workers):
    if cfg["budget"] not in BUDGETS:
        raise CliError(f"unknown budget {cfg['budget']!r} "
                       f"(choose from {', '.join(sorted(BUDGETS))})")
    report = full_report(stream, cfg["budget"], workers=workers)
    for entry in report.entries:
        em.emit("report-entry", cfg, **entry.as_dict())
    em.emit("report", cfg, overall_pass=report.overall_pass,
            n_entries=len(report.entries))
    if cfg["csv"]:
        cols = ("name", "lower", "value", "se", "upper", "tol",
                "margin", "pass", "informational")
        with open(cfg["csv"], "w") as fh:
            fh.write(",".join(cols) + "\n")
            for entry in report.entries:
                d = {c: _jsonable(entry.as_dict()[c]) for c in cols}
                fh.write(",".join(repr(d[c]) if isinstance(d[c], float)
                                  else str(d[c]) for c in cols) + "\n")
    return 0 if report.overall_pass else 1


_COMMANDS = {
    "zeros": _cmd_zeros,
    "heat-content": _cmd_heat_content,
    "rigidity": _cmd_rigidity,
    "trace": _cmd_trace,
    "torsion": _cmd_torsion,
    "capacity": _cmd_capacity,
    "kappa": _cmd_kappa,
    "loss": _cmd_loss,
    "constant": _cmd_constant,
    "escape": _cmd_escape,
    "report": _cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracrig",
        description="Torsional rigidity of cylinders with Brownian fractures")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, spec in _SPECS.items():
        sp = subs.add_parser(name)
        for key, (kind, _) in spec.items():
            flag = "--" + key
            if kind is bool:
                sp.add_argument(flag, action="store_const", const=True,
                                default=None)
            else:
                sp.add_argument(flag, type=kind, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--out", type=str, default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return 0 if code in (0, None) else 2
    spec = dict(_SPECS[args.subcommand])
    spec["seed"] = (int, int(os.environ.get("FRACRIG_SEED", DEFAULT_SEED)))
    spec["workers"] = (int, os.cpu_count() or 1)
    spec["out"] = (str, None)
    try:
        cfg = _resolve(args, spec)
        if cfg["workers"] < 1:
            raise CliError("workers must be >= 1")
        stream = RngStream(cfg["seed"])
        with _Emitter(cfg["out"]) as em:
            return _COMMANDS[args.subcommand](cfg, stream, em,
                                             cfg["workers"])
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
