"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
Option precedence is flags > ``--config`` JSON file > built-in defaults; the
effective configuration is written to every run manifest.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import RunConfig, format_model, run_method, sir_table, sis_study
from .fileio import (
    derivative_csv,
    metrics_csv,
    read_json,
    read_model,
    read_trajectory,
    sha256_file,
    tidy_csv,
    write_atomic,
    write_json,
    write_model,
    write_trajectory,
)
from .identify import ConstraintViolationError, SparsificationError
from .lp import LpCertificateError, LpOptions
from .simulate import SIR_X0, SIS_X0, IntegrationError, integrate, make_sir, make_sis

log = logging.getLogger("sparse_compartments")

EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 2, 3, 4
NUMERIC_ERRORS = (IntegrationError, SparsificationError, LpCertificateError, ConstraintViolationError)

COMMON_DEFAULTS = {
    "rtol": 1e-3,
    "atol": 1e-6,
    "degree": 2,
    "rank_tol": 1e-8,
    "threshold": 0.05,
    "max_rounds": 20,
    "out_dir": "out",
    "display_digits": 4,
}
SIMULATE_DEFAULTS = {**COMMON_DEFAULTS, "model": "sir", "beta": 0.2, "gamma": 0.1, "t_end": 100.0, "dt": 0.05, "x0": None}
IDENTIFY_DEFAULTS = {
    **COMMON_DEFAULTS,
    "trajectory": None,
    "truth": None,
    "derivatives": "exact",
    "method": "constrained",
    "dump_derivatives": False,
}
REPRODUCE_DEFAULTS = {**COMMON_DEFAULTS, "beta": 0.2, "gamma": 0.1, "t_end": 100.0, "dt": 0.05, "x0": None}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_integration(p):
    p.add_argument("--rtol", type=float, help="RK45 relative tolerance (default 1e-3)")
    p.add_argument("--atol", type=float, help="RK45 absolute tolerance (default 1e-6)")


def _add_identification(p):
    p.add_argument("--degree", type=int, help="dictionary degree (default 2)")
    p.add_argument("--rank-tol", dest="rank_tol", type=float, help="relative singular-value cutoff (default 1e-8)")
    p.add_argument("--threshold", type=float, help="stlsq threshold (default 0.05)")
    p.add_argument("--max-rounds", dest="max_rounds", type=int, help="stlsq rounds (default 20)")
    p.add_argument("--display-digits", dest="display_digits", type=int, help="rounding for printed equations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-compartments",
        description="Discover sparse, population-conserving compartment models from timeseries.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="repeat for more detail")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of option values")
    common.add_argument("--out-dir", dest="out_dir", type=Path, help="output directory (default ./out)")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    p = sub.add_parser("simulate", parents=[common], help="integrate a built-in or JSON model")
    p.add_argument("--model", help="sir, sis, or path to a model JSON")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--x0", type=_floats, help="initial state, comma separated")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    _add_integration(p)

    p = sub.add_parser("identify", parents=[common], help="identify a model from a trajectory CSV")
    p.add_argument("--trajectory", type=Path, help="trajectory CSV (t,x1,...,xM)")
    p.add_argument("--truth", type=Path, help="generating model JSON (required for exact derivatives)")
    p.add_argument("--derivatives", choices=["exact", "fd"])
    p.add_argument("--method", choices=["constrained", "ols", "stlsq"])
    p.add_argument("--dump-derivatives", dest="dump_derivatives", action="store_const", const=True)
    _add_integration(p)
    _add_identification(p)

    p = sub.add_parser("reproduce", parents=[common], help="rerun a canned experiment")
    p.add_argument("experiment", choices=["sir_table", "sis_study"])
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    _add_integration(p)
    _add_identification(p)
    return parser


def effective_config(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None) is not None:
        loaded = read_json(args.config)
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key, value in cfg.items():
        if isinstance(value, Path):
            cfg[key] = str(value)
    return cfg


def _run_config(cfg: dict, **over) -> RunConfig:
    keys = ("method", "derivatives", "degree", "rank_tol", "threshold", "max_rounds", "rtol", "atol")
    values = {k: cfg[k] for k in keys if k in cfg}
    values.update(over)
    return RunConfig(**values, lp=LpOptions())


def cmd_simulate(args) -> int:
    cfg = effective_config(args, SIMULATE_DEFAULTS)
    name = cfg["model"]
    if name == "sir":
        model, x0 = make_sir(cfg["beta"], cfg["gamma"]), SIR_X0
    elif name == "sis":
        model, x0 = make_sis(), SIS_X0
    else:
        model, x0 = read_model(name), None
    if cfg["x0"] is not None:
        x0 = cfg["x0"]
    if x0 is None:
        raise UsageError("--x0 is required for models loaded from JSON")
    if len(x0) != model.num_vars:
        raise UsageError(f"x0 has {len(x0)} entries, model has {model.num_vars} compartments")
    cfg["x0"] = [float(v) for v in x0]
    if not cfg["t_end"] > 0 or not cfg["dt"] > 0:
        raise UsageError("--t-end and --dt must be positive")

    traj = integrate(model, cfg["x0"], cfg["t_end"], cfg["dt"], cfg["rtol"], cfg["atol"])
    out = Path(cfg["out_dir"])
    write_trajectory(out / "trajectory.csv", traj)
    write_model(out / "model.json", model)
    totals = traj.states.sum(axis=1)
    drift = float(np.max(np.abs(totals - totals[0])))
    write_json(
        out / "manifest.json",
        {
            "command": "simulate",
            "version": __version__,
            "config": cfg,
            "model": model.to_json(),
            "samples": len(traj),
            "conservation_drift": drift,
            "outputs": {"trajectory.csv": sha256_file(out / "trajectory.csv")},
        },
    )
    print(f"wrote {len(traj)} samples to {out / 'trajectory.csv'}")
    print(f"conservation drift (max |sum(x) - sum(x0)|): {drift:.3e}")
    return 0


def cmd_identify(args) -> int:
    cfg = effective_config(args, IDENTIFY_DEFAULTS)
    if cfg["trajectory"] is None:
        raise UsageError("--trajectory is required")
    traj = read_trajectory(cfg["trajectory"])
    truth = read_model(cfg["truth"]) if cfg["truth"] is not None else None
    if cfg["derivatives"] == "exact" and truth is None:
        raise UsageError("--derivatives exact needs --truth MODEL_JSON")
    run = run_method(traj, _run_config(cfg), truth)

    out = Path(cfg["out_dir"])
    write_model(out / "recovered_model.json", run.model)
    write_trajectory(out / "resimulated.csv", run.resimulated)
    write_atomic(out / "metrics.csv", metrics_csv([(run.label, run.metrics)]))
    write_atomic(out / "metrics_full.csv", metrics_csv([(run.label, run.metrics)], full_precision=True))
    write_atomic(out / "tidy.csv", tidy_csv([(run.label, traj, run.resimulated)], run.model.compartments))
    if cfg["dump_derivatives"]:
        from .derivatives import derivatives

        write_atomic(out / "derivatives.csv", derivative_csv(derivatives(traj, cfg["derivatives"], truth).values))
    inputs = {str(cfg["trajectory"]): sha256_file(cfg["trajectory"])}
    if truth is not None:
        inputs[str(cfg["truth"])] = sha256_file(cfg["truth"])
    manifest = {
        "command": "identify",
        "version": __version__,
        "config": cfg,
        "inputs": inputs,
        "dictionary": run.model.dictionary.to_json(),
        "derivative_method": cfg["derivatives"],
        "tolerances": {"rtol": cfg["rtol"], "atol": cfg["atol"], "rank_tol": cfg["rank_tol"]},
        **run.summary(),
    }
    write_json(out / "manifest.json", manifest)
    for line in format_model(run.model, cfg["display_digits"]):
        print(line)
    print(metrics_csv([(run.label, run.metrics)]), end="")
    return 0


def cmd_reproduce(args) -> int:
    cfg = effective_config(args, REPRODUCE_DEFAULTS)
    out = Path(cfg["out_dir"])
    base = _run_config(cfg)
    if args.experiment == "sir_table":
        x0 = cfg["x0"] or list(SIR_X0)
        cfg["x0"] = x0
        truth, traj, results = sir_table(cfg["beta"], cfg["gamma"], x0, cfg["t_end"], cfg["dt"], base)
        rows = [(r.label, r.metrics) for r in results]
        write_trajectory(out / "trajectory.csv", traj)
        write_model(out / "truth_model.json", truth)
        write_atomic(out / "sir_table.csv", metrics_csv(rows))
        write_atomic(out / "sir_table_full.csv", metrics_csv(rows, full_precision=True))
        write_atomic(
            out / "tidy.csv", tidy_csv([(r.label, traj, r.resimulated) for r in results], truth.compartments)
        )
        for r in results:
            write_model(out / f"model_{_slug(r.label)}.json", r.model)
        write_json(
            out / "manifest.json",
            {
                "command": "reproduce sir_table",
                "version": __version__,
                "config": cfg,
                "truth": truth.to_json(),
                "runs": [r.summary() for r in results],
            },
        )
        print(metrics_csv(rows), end="")
        return 0

    x0 = cfg["x0"] or list(SIS_X0)
    cfg["x0"] = x0
    study = sis_study(x0, cfg["t_end"], cfg["dt"], base)
    run = study["run"]
    write_trajectory(out / "trajectory.csv", study["trajectory"])
    write_model(out / "recovered_model.json", run.model)
    write_model(out / "truth_model.json", study["truth"])
    write_atomic(
        out / "tidy.csv", tidy_csv([(run.label, study["trajectory"], run.resimulated)], run.model.compartments)
    )
    report = {k: v for k, v in study.items() if k not in ("run", "trajectory", "truth")}
    write_json(
        out / "manifest.json",
        {"command": "reproduce sis_study", "version": __version__, "config": cfg, **report, **run.summary()},
    )
    for line in format_model(run.model, cfg["display_digits"]):
        print(line)
    print(f"1-norm recovered {study['l1_recovered']:.6f} (generating system {study['l1_generating']:.6f})")
    print(f"design matrix rank {study['design_rank']} of {study['design_columns']} columns")
    print(f"max |rhs difference| on data {study['max_rhs_difference']:.3e}")
    return 0


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in label).strip("_").lower()


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
