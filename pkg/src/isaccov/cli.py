"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import analytic
from .experiments import (
    PRESETS,
    VARY_AXES,
    ConfigError,
    SweepSpec,
    agreement_failures,
    format_csv,
    load_config,
    preset,
    run_sweep,
    write_csv,
)
from .montecarlo import estimate_coverage

SEED_ENV = "ISACCOV_SEED"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INPUT = 2


class InputError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """Grid from ``a,b,c``, ``lin:start:stop:n`` or ``log:start:stop:n``."""
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, start, stop, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError("grid needs at least one point")
            if kind == "lin":
                return [float(x) for x in np.linspace(float(start), float(stop), n)]
            return [float(x) for x in np.logspace(math.log10(float(start)), math.log10(float(stop)), n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad grid {text!r}: {exc}") from exc


def _default_seed(cli_seed: int | None) -> int | None:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from exc


def _emit(rows, out):
    if out:
        write_csv(rows, out)
    else:
        sys.stdout.write(format_csv(rows))


def _tasks(task):
    return ("comm", "sens") if task == "both" else (task,)


def cmd_analytic(args) -> int:
    cfg = load_config(args.config)
    if args.threshold_db is not None:
        cfg = cfg.replace(threshold_comm_db=args.threshold_db, threshold_sens_db=args.threshold_db)
    net, pl, b, f = cfg.network(), cfg.pathloss(), cfg.blockage(), cfg.fading()
    for task in _tasks(args.task):
        fn = analytic.comm_coverage if task == "comm" else analytic.sens_coverage
        res = fn(net, pl, b, f)
        t_db = cfg.threshold_comm_db if task == "comm" else cfg.threshold_sens_db
        print(f"{task} T={t_db:g} dB coverage={res.value!r} quadrature_error={res.quadrature_error:.3g}")
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    seed = _default_seed(args.seed)
    n = args.n_snapshots or cfg.n_snapshots
    thresholds = args.threshold_db or [cfg.threshold_comm_db]
    noise = cfg.noise_watt / cfg.tx_power_watt
    scenario = cfg.scenario(seed)
    for task in _tasks(args.task):
        for t_db, est in zip(thresholds, estimate_coverage(
            task, thresholds, scenario, cfg.pathloss(), cfg.fading(analytic_path=False), noise, n
        )):
            print(f"{task} T={t_db:g} dB coverage={est.mean!r} ci=[{est.ci_low!r}, {est.ci_high!r}] n={est.n}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seed = _default_seed(args.seed)
    spec = SweepSpec(
        task=args.task,
        vary=args.vary,
        grid=tuple(parse_grid(args.grid)),
        fixed=cfg,
        methods=args.methods,
        n_snapshots=args.n_snapshots or cfg.n_snapshots,
        seed=cfg.seed if seed is None else seed,
        name="sweep",
    )
    rows = run_sweep(spec)
    _emit(rows, args.out)
    return EXIT_OK


def _run_preset(name, args) -> int:
    cfg = load_config(args.config)
    if args.n_snapshots:
        cfg = cfg.replace(n_snapshots=args.n_snapshots)
    seed = _default_seed(args.seed)
    spec = preset(name, seed=cfg.seed if seed is None else seed, base=cfg)
    rows = run_sweep(spec)
    _emit(rows, args.out)
    if name == "validate":
        bad = agreement_failures(rows)
        for row in bad:
            print(
                f"disagreement: {row.task} T={row.threshold_db:g} dB analytic={row.analytic_value} "
                f"mc={row.mc_mean} ci=[{row.mc_ci_low}, {row.mc_ci_high}] {row.error}",
                file=sys.stderr,
            )
        return EXIT_VALIDATION if bad else EXIT_OK
    errors = [row for row in rows if row.error]
    for row in errors:
        print(f"row error: {row.task} {row.error}", file=sys.stderr)
    return EXIT_OK


def cmd_preset(args) -> int:
    return _run_preset(args.name, args)


def cmd_validate(args) -> int:
    return _run_preset("validate", args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isaccov", description="ISAC network coverage: analysis and simulation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key = value parameter file (defaults otherwise)")
        if seed:
            p.add_argument("--seed", type=int, help=f"simulation seed (default: ${SEED_ENV} or the config)")

    p = sub.add_parser("analytic", help="coverage from the integral expressions")
    common(p, seed=False)
    p.add_argument("--task", choices=("comm", "sens", "both"), default="both")
    p.add_argument("--threshold-db", type=float)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("mc", help="coverage by Monte Carlo simulation")
    common(p)
    p.add_argument("--task", choices=("comm", "sens", "both"), default="both")
    p.add_argument("--threshold-db", type=float, nargs="+")
    p.add_argument("--n-snapshots", type=int)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="one-axis parameter sweep to CSV")
    common(p)
    p.add_argument("--vary", choices=VARY_AXES, required=True)
    p.add_argument("--grid", required=True, help="a,b,c | lin:start:stop:n | log:start:stop:n")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--task", choices=("comm", "sens", "both"), default="both")
    p.add_argument("--methods", choices=("analytic", "mc", "both"), default="both")
    p.add_argument("--n-snapshots", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", help="figure-reproduction sweep to CSV")
    common(p)
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--n-snapshots", type=int)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("validate", help="analytic vs simulation agreement check (exit 1 on failure)")
    common(p)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--n-snapshots", type=int)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
