"""Command-line interface.

Exit codes: 0 success, 2 precondition violation, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from typing import Sequence

import numpy as np

from . import figures
from .config import build_process, load_config
from .errors import NumericalError, PreconditionError, ValidationFailure
from .fpt_double import Interval, averaged_exit_time, exit_density, exit_moment, exit_probabilities
from .fpt_single import fpt_density, fpt_moment
from .gm_core import transform
from .mc_oracle import PathConfig, estimate_exit, estimate_fpt, export_paths_csv, simulate_xy
from .numerics import DEFAULT_QUAD, DEFAULT_SERIES
from .validation import format_report, run_validation

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

# flag defaults; a config file fills in whatever the command line leaves unset
DEFAULTS = {
    "process": "ibm",
    "mu": 1.0,
    "sigma": 1.0,
    "beta": 0.0,
    "y": 0.0,
    "T": 1.0,
    "alpha": 0.0,
    "x": 0.0,
    "a": None,
    "b": None,
    "n": None,
    "p": None,
    "t": None,
    "paths": None,
    "dt": 1e-3,
    "t_max": 50.0,
    "seed": 0,
    "terms": 20,
    "cutoff": 10.0,
    "out": None,
    "grid_points": 201,
    "n_se": 3.0,
    "export_paths": None,
}


def fmt(v: float) -> str:
    """Scalar output with 10 significant digits."""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def _add_common(p: argparse.ArgumentParser) -> None:
    # every option defaults to None so that config-file values can fill the gaps
    g = p.add_argument_group("process")
    g.add_argument("--config", help="key = value file with any of the options below")
    g.add_argument("--process", choices=["ibm", "ou", "bridge"])
    for name in ("mu", "sigma", "beta", "y", "T", "alpha"):
        g.add_argument(f"--{name}", type=float)
    q = p.add_argument_group("quantity")
    for name in ("x", "a", "b", "n", "p"):
        q.add_argument(f"--{name}", type=float)
    q.add_argument("--t", type=str, help="time or comma-separated times")
    s = p.add_argument_group("numerics")
    s.add_argument("--terms", type=int, help="series truncation (default 20)")
    s.add_argument("--cutoff", type=float, help="improper-integral cutoff (default 10)")
    s.add_argument("--paths", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--t-max", dest="t_max", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--n-se", dest="n_se", type=float, help="validation tolerance in standard errors")
    s.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--out", help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igmfpt", description="First-passage and exit times of integrated Gauss-Markov processes."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "density": "first-passage density (--a) or exit density (--a and --b) at --t",
        "moment": "single-boundary moment E[tau^p] (--p, or --n)",
        "exit": "exit-time moment of (--a, --b) of order --n",
        "exit-prob": "exit probabilities pi_a pi_b",
        "averaged": "mean exit time of integrated BM from a uniform start",
        "validate": "analytic-versus-Monte-Carlo check suite",
        "simulate": "Monte Carlo estimate of the passage (--a) or exit (--a, --b) time",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text, description=text))
    fig = sub.add_parser("figure", help="write a figure table as CSV", description="write a figure table as CSV")
    fig.add_argument("id", choices=figures.FIGURES)
    _add_common(fig)
    sim = sub.choices["simulate"]
    sim.add_argument("--export-paths", dest="export_paths", help="write the first 10 full paths to this CSV")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(load_config(args.config))
    for key, value in vars(args).items():
        if value is not None and key != "config":
            merged[key] = value
    return merged


def _require(opts: dict, *names: str) -> None:
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        raise PreconditionError("missing option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _controls(opts: dict):
    series = dataclasses.replace(DEFAULT_SERIES, truncation_k=int(opts["terms"]))
    quad = dataclasses.replace(DEFAULT_QUAD, improper_cutoff=float(opts["cutoff"]))
    return series, quad


def _times(opts: dict) -> list[float]:
    _require(opts, "t")
    raw = opts["t"]
    if isinstance(raw, (int, float)):
        return [float(raw)]
    try:
        return [float(v) for v in str(raw).split(",") if v.strip()]
    except ValueError as exc:
        raise PreconditionError(f"bad --t value {raw!r}") from exc


def _emit(values: list[tuple[float, float]], header: list[str], opts: dict, out) -> None:
    if opts.get("out"):
        figures.write_csv(opts["out"], header, np.array(values))
    if len(values) == 1:
        print(fmt(values[0][1]), file=out)
    else:
        for row in values:
            print(" ".join(fmt(v) for v in row), file=out)


def cmd_density(opts: dict, out) -> int:
    _require(opts, "a")
    process = build_process(opts["process"], opts)
    rep = transform(process)
    series, _ = _controls(opts)
    ts = _times(opts)
    if opts.get("b") is not None:
        interval = Interval(opts["a"], opts["b"])
        vals = [(t, exit_density(rep, opts["x"], interval, t, series)) for t in ts]
    else:
        vals = [(t, fpt_density(rep, opts["x"], opts["a"], t)) for t in ts]
    _emit(vals, ["t", "density"], opts, out)
    return EXIT_OK


def cmd_moment(opts: dict, out) -> int:
    _require(opts, "a")
    p = opts["p"] if opts.get("p") is not None else (opts["n"] if opts.get("n") is not None else 1.0)
    rep = transform(build_process(opts["process"], opts))
    _, quad = _controls(opts)
    value = fpt_moment(rep, opts["x"], opts["a"], p, quad)
    _emit([(p, value)], ["p", "moment"], opts, out)
    return EXIT_OK


def cmd_exit(opts: dict, out) -> int:
    _require(opts, "a", "b")
    n = opts["n"] if opts.get("n") is not None else 1.0
    rep = transform(build_process(opts["process"], opts))
    series, quad = _controls(opts)
    res = exit_moment(rep, opts["x"], Interval(opts["a"], opts["b"]), n, series, quad)
    _emit([(n, res.value)], ["n", "moment"], opts, out)
    return EXIT_OK


def cmd_exit_prob(opts: dict, out) -> int:
    _require(opts, "a", "b")
    pi_a, pi_b = exit_probabilities(opts["x"], Interval(opts["a"], opts["b"]))
    if opts.get("out"):
        figures.write_csv(opts["out"], ["x", "pi_a", "pi_b"], np.array([[opts["x"], pi_a, pi_b]]))
    print(f"{fmt(pi_a)} {fmt(pi_b)}", file=out)
    return EXIT_OK


def cmd_averaged(opts: dict, out) -> int:
    _require(opts, "a", "b")
    value = averaged_exit_time(Interval(opts["a"], opts["b"]))
    _emit([(opts["b"] - opts["a"], value)], ["length", "averaged_exit_time"], opts, out)
    return EXIT_OK


def cmd_figure(opts: dict, out) -> int:
    series, quad = _controls(opts)
    header, rows = figures.figure_table(opts["id"], int(opts["grid_points"]), series, quad)
    target = opts.get("out") or f"{opts['id']}.csv"
    figures.write_csv(target, header, rows)
    print(target, file=out)
    return EXIT_OK


def cmd_validate(opts: dict, out) -> int:
    paths = int(opts["paths"]) if opts.get("paths") is not None else 200_000
    results = run_validation(paths, float(opts["dt"]), int(opts["seed"]), float(opts["n_se"]), float(opts["t_max"]))
    report = format_report(results)
    print(report, file=out)
    if opts.get("out"):
        with open(opts["out"], "w", newline="", encoding="ascii") as fh:
            fh.write(report + "\n")
    failing = [r.name for r in results if not r.passed]
    if failing:
        raise ValidationFailure(failing)
    return EXIT_OK


def cmd_simulate(opts: dict, out) -> int:
    _require(opts, "a")
    process = build_process(opts["process"], opts)
    paths = int(opts["paths"]) if opts.get("paths") is not None else 10_000
    cfg = PathConfig(dt=float(opts["dt"]), t_max=float(opts["t_max"]), n_paths=paths, seed=int(opts["seed"]))
    if opts.get("export_paths"):
        sample = simulate_xy(process, opts["x"], dataclasses.replace(cfg, n_paths=min(paths, 10)))
        export_paths_csv(sample, opts["export_paths"])
    if opts.get("b") is not None:
        est = estimate_exit(process, opts["x"], Interval(opts["a"], opts["b"]), cfg)
        rows = [
            ("mean", est.mean.mean, est.mean.std_error),
            ("second_moment", est.second_moment.mean, est.second_moment.std_error),
            ("pi_a", est.pi_a, est.pi_std_error),
            ("pi_b", est.pi_b, est.pi_std_error),
            ("censored_fraction", est.censored_fraction, 0.0),
        ]
    else:
        p = opts["p"] if opts.get("p") is not None else 1.0
        est = estimate_fpt(process, opts["x"], opts["a"], cfg, p)
        rows = [("moment", est.mean, est.std_error), ("censored_fraction", est.censored_fraction, 0.0)]
    for name, value, se in rows:
        print(f"{name} {fmt(value)} {fmt(se)}", file=out)
    if opts.get("out"):
        with open(opts["out"], "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "estimate", "std_error"])
            for name, value, se in rows:
                w.writerow([name, figures.format_value(value), figures.format_value(se)])
    return EXIT_OK


COMMANDS = {
    "density": cmd_density,
    "moment": cmd_moment,
    "exit": cmd_exit,
    "exit-prob": cmd_exit_prob,
    "averaged": cmd_averaged,
    "figure": cmd_figure,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
}


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](resolve(args), out)
    except ValidationFailure as exc:
        print(f"validation failed: {', '.join(exc.failing)}", file=err)
        return EXIT_VALIDATION
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=err)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=err)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
