"""Command-line front end: ``quenchflow <command> ...``.

Configuration files are flat ``key = value`` documents; ``#`` starts a
comment and expression values run unquoted to the end of the line.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .barriers import HypothesisViolated
from .experiments import SweepPlan, certified_run, epsilon_sweep, limit_convergence_study, quench_location_study
from .expr import ExprError, parse_expr, validate_assumptions
from .mesh import SnapshotMissing, UnsupportedDimension, export_mesh
from .model import SCHEMES, InvalidResolution, InvalidSpec, ProblemSpec, build_grid
from .records import CorruptRecord, load_record, save_record

__all__ = ["ConfigError", "UnknownKey", "TypeMismatch", "MissingKey", "Config",
           "parse_config", "load_config", "main", "CONFIG_KEYS"]

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _floats(s: str) -> tuple:
    vals = tuple(float(p) for p in s.replace(",", " ").split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _expr(s: str) -> str:
    parse_expr(s)
    return s


def _positive(v):
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _resolution(v):
    build_grid(v)
    return v


def _scheme(s):
    if s not in SCHEMES:
        raise ValueError(f"must be one of {', '.join(SCHEMES)}")
    return s


def _axis(s):
    if s not in ("eps", "alpha", "J", "resolution"):
        raise ValueError("must be eps, alpha, J or resolution")
    return s


# key -> (parser, default, description); REQUIRED marks keys without a default
REQUIRED = object()
CONFIG_KEYS: dict[str, tuple[Callable, object, str]] = {
    "f": (_expr, REQUIRED, "forcing f(x), 1-periodic expression in x"),
    "g": (_expr, REQUIRED, "initial shape g(x) > 0, 1-periodic expression in x"),
    "n": (lambda s: _positive(_int(s)), 2, "dimension of the surface of revolution"),
    "eps": (lambda s: _positive(float(s)), 1.0, "scale parameter"),
    "alpha": (lambda s: _positive(float(s)), 1.0, "initial amplitude exponent, u(x,0) = eps^alpha g(x)"),
    "J": (lambda s: _resolution(_int(s)), 256, "grid nodes (even, >= 16)"),
    "t_max": (lambda s: _positive(float(s)), None, "horizon; default 10 eps^2 (max g)^2 / (n-1)"),
    "theta_q": (lambda s: _positive(float(s)), None,
                "quench threshold; default min(10 dx eps^min(alpha,1), 0.05 eps^alpha min g)"),
    "scheme": (_scheme, "explicit-monotone", "explicit-monotone or imex"),
    "dt_max": (lambda s: _positive(float(s)), 1e-2, "largest time step"),
    "c_diff": (lambda s: _positive(float(s)), 0.4, "diffusion step factor (explicit scheme)"),
    "c_react": (lambda s: _positive(float(s)), 0.05, "reaction step factor"),
    "c_force": (lambda s: _positive(float(s)), 0.1, "forcing step factor"),
    "record_stride": (lambda s: _positive(_int(s)), 10, "steps between recorded diagnostics"),
    "snapshot_stride": (_int, 0, "steps between stored profiles (0 = none)"),
    "rescaled": (_bool, False, "evolve w = u(x, eps^2 s)/eps instead of u"),
    "out": (str, "", "output stem/directory; default derived from the config file name"),
    "sweep_axis": (_axis, "eps", "sweep: axis to vary"),
    "sweep_values": (_floats, None, "sweep: comma separated values (required for sweep)"),
    "barrier_offset": (lambda s: _positive(float(s)), 0.01, "sweep: relative offset of the ODE barriers"),
    "limit_eps": (_floats, (0.4, 0.2, 0.1), "limit: eps values"),
    "limit_times": (lambda s: _positive(_int(s)), 8, "limit: number of lattice times"),
    "a": (lambda s: _positive(float(s)), 0.05, "locate: left end of the sine barrier interval"),
    "a_star": (lambda s: _positive(float(s)), 0.1, "locate: excluded zone is [a_star, 1 - a_star]"),
    "b": (lambda s: _positive(float(s)), 0.45, "locate: right end of the sine barrier interval"),
}

SPEC_KEYS = ("f", "g", "n", "eps", "alpha", "J", "t_max", "theta_q", "scheme", "dt_max",
             "c_diff", "c_react", "c_force", "record_stride", "snapshot_stride", "rescaled")


@dataclass
class Config:
    values: dict
    lines: dict = field(default_factory=dict)
    source: Optional[Path] = None

    def __getitem__(self, key):
        return self.values[key]

    def spec(self, **overrides) -> ProblemSpec:
        kw = {k: self.values[k] for k in SPEC_KEYS}
        kw.update(overrides)
        return ProblemSpec(**kw)

    def out_path(self, suffix: str) -> Path:
        if self.values["out"]:
            return Path(self.values["out"])
        if self.source is not None:
            return self.source.with_name(self.source.stem + suffix)
        return Path("quenchflow" + suffix)


def parse_config(text: str, source=None) -> Config:
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TypeMismatch(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        if key in values:
            raise TypeMismatch(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        conv = CONFIG_KEYS[key][0]
        try:
            values[key] = conv(val)
        except (ValueError, ExprError, InvalidResolution) as err:
            raise TypeMismatch(f"bad value for {key!r}: {err}", lineno) from None
        lines[key] = lineno
    for key, (_, default, _) in CONFIG_KEYS.items():
        if key in values:
            continue
        if default is REQUIRED:
            raise MissingKey(f"missing required key {key!r}")
        values[key] = default
    return Config(values, lines, None if source is None else Path(source))


def load_config(path) -> Config:
    path = Path(path)
    return parse_config(path.read_text(), source=path)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_assumptions(parse_expr(cfg["f"]), parse_expr(cfg["g"]))
    print(report.summary())
    cfg.spec().resolved()
    return EXIT_OK if report.a1 else EXIT_INVALID


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    rec = certified_run(cfg.spec(), cfg["barrier_offset"])
    stem = cfg.out_path(".run")
    save_record(rec, stem)
    print(f"verdict      {rec.verdict}")
    print(f"t_stop       {rec.t_stop:.10g}")
    if rec.T_star_estimate is not None:
        print(f"T*_estimate  {rec.T_star_estimate:.10g}")
        print(f"T*_fit       {rec.T_star_fit:.10g} (residual {rec.fit_residual:.2e})")
        print(f"locations    {', '.join(f'{x:.6g}' for x in rec.quench_locations)}")
    if rec.abort_reason:
        print(f"aborted      {rec.abort_reason}")
    print(f"min u        {rec.min_u_overall:.6g}")
    print(f"certificate  {rec.extra['certificate']}")
    print(f"steps        {rec.step_count}")
    print(f"record       {stem}.csv, {stem}.json")
    return EXIT_RUNTIME if rec.verdict == "Aborted" else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg["sweep_values"] is None:
        raise MissingKey("sweep needs 'sweep_values'")
    out = cfg.out_path("_sweep")
    plan = SweepPlan(base=cfg.spec(), axis=cfg["sweep_axis"], values=cfg["sweep_values"],
                     horizon=cfg["t_max"], out_dir=out, barrier_offset=cfg["barrier_offset"])
    table = epsilon_sweep(plan)
    print(table.summary())
    print(f"table        {out / 'regime.csv'}")
    return EXIT_OK


def cmd_limit(args) -> int:
    cfg = load_config(args.config)
    rows = limit_convergence_study(cfg.spec(t_max=None), cfg["limit_eps"], n_times=cfg["limit_times"])
    path = cfg.out_path("_limit.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eps", "sup_error", "T_rescaled", "T_limit", "verdict"))
        for r in rows:
            w.writerow([repr(r.eps), repr(r.sup_error),
                        "" if r.T_rescaled is None else repr(r.T_rescaled), repr(r.T_limit), r.verdict])
    print(f"{'eps':>8s} {'sup_error':>12s} {'T*/eps^2':>12s} {'T_limit':>10s}")
    for r in rows:
        T = "-" if r.T_rescaled is None else f"{r.T_rescaled:.6g}"
        print(f"{r.eps:8.4g} {r.sup_error:12.4e} {T:>12s} {r.T_limit:10.6g}")
    print(f"table        {path}")
    return EXIT_OK


def cmd_locate(args) -> int:
    cfg = load_config(args.config)
    report = quench_location_study(cfg.spec(), a=cfg["a"], a_star=cfg["a_star"], b=cfg["b"])
    stem = cfg.out_path(".locate")
    save_record(report.record, stem)
    print(report.summary())
    print(f"record       {stem}.csv, {stem}.json")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_export_mesh(args) -> int:
    rec = load_record(args.record)
    path = export_mesh(rec, args.t, args.out, K=args.K)
    print(f"wrote {path} ({rec.spec.J * args.K} vertices)")
    return EXIT_OK


def _keys_help() -> str:
    rows = ["config keys (flat 'key = value', '#' comments):"]
    for key, (_, default, desc) in CONFIG_KEYS.items():
        d = "required" if default is REQUIRED else f"default {default!r}"
        rows.append(f"  {key:15s} {desc} [{d}]")
    rows.append("")
    rows.append("exit codes: 0 success, 1 hypothesis or validation failure, 2 runtime error")
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenchflow", description="Simulate forced axisymmetric curvature flow.",
                                epilog=_keys_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, desc in (
        ("validate", cmd_validate, "check the assumptions on f and g"),
        ("run", cmd_run, "run one problem to quench or horizon"),
        ("sweep", cmd_sweep, "one-dimensional sweep with barrier certificates"),
        ("limit", cmd_limit, "convergence of u(x, eps^2 t)/eps to the pointwise limit"),
        ("locate", cmd_locate, "quench location study for symmetric monotone data"),
    ):
        sp = sub.add_parser(name, help=desc, description=desc, epilog=_keys_help(),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("config", type=Path)
        sp.set_defaults(func=fn)
    sp = sub.add_parser("export-mesh", help="write an OBJ surface of revolution from a record")
    sp.add_argument("record", help="record stem (without .csv/.json)")
    sp.add_argument("t", type=float)
    sp.add_argument("out", type=Path)
    sp.add_argument("--K", type=int, default=64, help="angular resolution (default 64)")
    sp.set_defaults(func=cmd_export_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HypothesisViolated, InvalidSpec, ExprError, UnsupportedDimension) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (SnapshotMissing, CorruptRecord, FileNotFoundError, RuntimeError, ArithmeticError, ValueError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
