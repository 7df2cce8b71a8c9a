"""Command-line entry point: ``adaptomo {simulate,fit,compare,replay,prior-hist}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .design import Adaptive, MubCycle, RandomAxes
from .priors import BuresHaar, InducedPure, sample_prior_stokes, slab_density_profile
from .qubit import QubitState
from .runner import (
    DEFAULT_COMPARISON,
    ConfigError,
    FitError,
    RunConfig,
    RunFailure,
    compare_strategies,
    fit_power_law,
    read_curve,
    replay,
    run_experiment,
    write_json,
    write_trajectory,
)

STRATEGIES = {
    "adaptive": Adaptive(),
    "random": RandomAxes(),
    "mub": MubCycle("generic"),
    "mub_best": MubCycle("best"),
    "mub_worst": MubCycle("worst"),
}
PRIORS = {"bures": BuresHaar(), "induced2": InducedPure(2), "induced3": InducedPure(3)}


def _read_config(path):
    raw = json.loads(Path(path).read_text())
    return RunConfig.from_dict(raw), raw.get("output")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["n_runs"] = args.runs
    if args.measurements is not None:
        changes["n_measurements"] = args.measurements
    if args.blocks is not None:
        changes["blocks"] = args.blocks
    if args.workers is not None:
        changes["workers"] = args.workers
    if getattr(args, "strategy", None) is not None:
        changes["strategy"] = STRATEGIES[args.strategy]
    if args.particles is not None:
        changes["filter"] = replace(cfg.filter, n_particles=args.particles)
    return replace(cfg, **changes) if changes else cfg


def _print_fit(name, res):
    fit = res.fits.get("infid_to_true")
    if fit is None:
        print(f"{name}: final infid_to_true={res.infid_to_true[-1]:.4g} (no fit)")
    else:
        print(f"{name}: a={fit.exponent:.4f} +/- {fit.exponent_se:.4f}  c={fit.prefactor:.4g}  "
              f"final infid_to_true={res.infid_to_true[-1]:.4g}")


def cmd_simulate(args) -> int:
    cfg, out = _read_config(args.config)
    cfg = _apply_overrides(cfg, args)
    out_dir = Path(args.out_dir or out or "out")
    res = run_experiment(cfg, out_dir)
    _print_fit(cfg.strategy.name, res)
    print(f"wrote {out_dir}")
    return 0


def cmd_compare(args) -> int:
    cfg, out = _read_config(args.config)
    cfg = _apply_overrides(cfg, args)
    names = args.strategies.split(",") if args.strategies else list(DEFAULT_COMPARISON)
    unknown = [n for n in names if n not in STRATEGIES]
    if unknown:
        raise ConfigError(f"unknown strategies {unknown}; choose from {sorted(STRATEGIES)}")
    out_dir = Path(args.out_dir or out or "out")
    results = compare_strategies(cfg, {n: STRATEGIES[n] for n in names}, out_dir)
    for name, res in results.items():
        _print_fit(name, res)
    print(f"wrote {out_dir}")
    return 0


def cmd_fit(args) -> int:
    n, y = read_curve(args.curve, args.column)
    window = tuple(args.window) if args.window else None
    fit = fit_power_law(n, y, window)
    d = fit.to_dict()
    d["column"] = args.column
    if args.output:
        write_json(d, args.output)
    else:
        print(json.dumps(d, indent=2, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    cfg = _read_config(args.config)[0] if args.config else None
    truth = QubitState.from_vector(args.true_state) if args.true_state else None
    seed_seq = tuple(args.seed_sequence) if args.seed_sequence else None
    with open(args.events) as fh:
        records = replay(fh, seed_seq, truth, cfg)
    write_trajectory(records, args.output or sys.stdout)
    return 0


def cmd_prior_hist(args) -> int:
    samples = sample_prior_stokes(PRIORS[args.prior], args.samples, seed=args.seed)
    prof = slab_density_profile(samples, args.halfwidth, bins=args.bins)
    if prof.is_empty:
        print("no samples inside the slab", file=sys.stderr)
    prof.to_csv(args.output or sys.stdout)
    return 0


def _add_run_overrides(p):
    p.add_argument("config", help="JSON run config")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out-dir", help="output directory (overrides the config 'output' key)")
    p.add_argument("--runs", type=int, help="number of runs")
    p.add_argument("--measurements", "-N", type=int, help="measurements per run")
    p.add_argument("--particles", type=int, help="particles per filter")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--blocks", dest="blocks", action="store_true", default=None, help="use the block schedule")
    g.add_argument("--no-blocks", dest="blocks", action="store_false", help="one measurement per setting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptomo", description="Adaptive Bayesian qubit tomography simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a multi-run experiment from a config file")
    _add_run_overrides(p)
    p.add_argument("--strategy", choices=sorted(STRATEGIES), help="measurement strategy")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several strategies on the same seeds and true states")
    _add_run_overrides(p)
    p.add_argument("--strategies", help=f"comma-separated subset of {','.join(STRATEGIES)}")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="fit a power law to an averaged-curve CSV")
    p.add_argument("curve", help="CSV with columns n and the chosen infidelity column")
    p.add_argument("--column", default="infid_to_true", help="infidelity column (default: infid_to_true)")
    p.add_argument("--window", type=float, nargs=2, metavar=("N_MIN", "N_MAX"), help="fit window")
    p.add_argument("-o", "--output", help="write fit JSON here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replay", help="rebuild a posterior trajectory from an event log")
    p.add_argument("events", help="event log (JSON lines)")
    p.add_argument("--config", help="run config, if the log has no header")
    p.add_argument("--seed-sequence", type=int, nargs=2, metavar=("MASTER", "RUN"),
                   help="seed pair for the filter stream (default: from the log header)")
    p.add_argument("--true-state", type=float, nargs=3, metavar=("S1", "S2", "S3"),
                   help="Stokes vector of the true state, for infid_to_true")
    p.add_argument("-o", "--output", help="trajectory CSV path (default: stdout)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("prior-hist", help="slab histogram of prior samples in the s1-s2 plane")
    p.add_argument("--prior", choices=sorted(PRIORS), default="bures")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--halfwidth", type=float, default=0.05, help="slab half-width in s3")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_prior_hist)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FitError, RunFailure, FileNotFoundError, ValueError) as exc:
        print(f"adaptomo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
