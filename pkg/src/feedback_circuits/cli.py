"""Command-line entry point.

Subcommands: ``run`` (execute a configured experiment), ``compare``
(cross-engine check on a shared spec), ``fit`` (continuum-model fit of a
density CSV), ``budget`` (calibration-based time/error estimates) and
``fixtures`` (regenerate the channel reference series).

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import budget as budget_mod
from . import continuum
from .circuit_model import FeedbackRule
from .config import ENGINES, parse_config
from .errors import InvalidSpec, ParseError, ValidationError
from .fixtures import write_channel_fixtures
from .orchestrator import (
    compare_engines, format_comparison, read_density_csv, run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbcirc",
        description="Simulators for feedback-directed monitored random circuits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument("--workers", type=int, default=None,
                       help="override worker count (0 = auto)")
    p_run.add_argument("--out", default=None, help="override output directory")

    p_cmp = sub.add_parser("compare", help="compare engines on a shared spec")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--engines", required=True,
                       help=f"comma-separated subset of {ENGINES}")
    p_cmp.add_argument("--tol-density", type=float, default=float("inf"))
    p_cmp.add_argument("--tol-com", type=float, default=float("inf"))

    p_fit = sub.add_parser("fit", help="fit a continuum model to a density CSV")
    p_fit.add_argument("--densities", required=True, help="densities.csv from a run")
    p_fit.add_argument("--model", choices=("decay_diffusion", "drift_diffusion"),
                       required=True)
    p_fit.add_argument("--k", type=int, default=4, help="drift-diffusion order")
    p_fit.add_argument("--layers", type=int, default=None,
                       help="use only the first N+1 frames")

    p_budget = sub.add_parser("budget", help="hardware time/error budget")
    p_budget.add_argument("--calib", required=True, help="calibration key=value file")
    p_budget.add_argument("--L", type=int, required=True)
    p_budget.add_argument("--p", type=float, required=True,
                          help="per-site measurement probability")
    p_budget.add_argument("--depth", type=int, required=True)
    p_budget.add_argument("--feedback", choices=("cond_x", "cond_swap"),
                          default="cond_x")
    p_budget.add_argument("--json", action="store_true", dest="as_json",
                          help="machine-readable output")

    p_fix = sub.add_parser("fixtures", help="regenerate channel reference fixtures")
    p_fix.add_argument("--out", default="tests/fixtures/channel_reference.json")
    return parser


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    config.validate()
    result = run_experiment(config)
    print(f"wrote {len(result.manifest['outputs'])} files to {config.output_dir}")
    for name, digest in sorted(result.manifest["outputs"].items()):
        print(f"  {name}  sha256={digest[:16]}")
    return 0


def _cmd_compare(args) -> int:
    config = parse_config(args.config)
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    for engine in engines:
        config.with_engine(engine).validate()
    report = compare_engines(config, engines,
                             density_tol=args.tol_density, com_tol=args.tol_com)
    print(format_comparison(report))
    return 0 if report["passed"] else 2


def _cmd_fit(args) -> int:
    series = read_density_csv(args.densities)
    data = series.get(-1)
    if data is None:
        data = series[sorted(series)[0]]
    if args.layers is not None:
        data = data[: args.layers + 1]
    if args.model == "decay_diffusion":
        result = continuum.fit_decay_diffusion(data, dt=1.0)
        title = "decay-diffusion fit (u = x/L units, layer time)"
    else:
        result = continuum.fit_drift_diffusion(data, k=args.k, dt=1.0, dx=1.0)
        title = "drift-diffusion fit (site units, layer time)"
    print(continuum.format_fit_report(result, title=title))
    return 0


def _cmd_budget(args) -> int:
    calib = budget_mod.load_calibration(args.calib)
    feedback = FeedbackRule(args.feedback)
    report = budget_mod.budget_report(calib, args.L, args.p, args.depth, feedback)
    if args.as_json:
        print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    else:
        print(budget_mod.format_budget_report(report))
    return 0


def _cmd_fixtures(args) -> int:
    path = write_channel_fixtures(args.out)
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "fit": _cmd_fit,
    "budget": _cmd_budget,
    "fixtures": _cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError, InvalidSpec, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
