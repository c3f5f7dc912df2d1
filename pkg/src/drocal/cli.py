"""Command-line entry point.

Subcommands::

    drocal frontier-bootstrap --config FILE [--seed N] [--out DIR] [--set key=value ...]
    drocal frontier-oos       ...
    drocal calibrate          ...
    drocal run-suite {newsvendor,portfolio,logistic,toy} ...

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver failure.
"""

import argparse
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, ExperimentConfig
from .exceptions import ConfigError, DataError, SolverError
from .frontier import (
    HighConfidence, MaxMean, MeanVarTradeoff, Satisficing, bootstrap_frontier, calibrate,
    high_confidence_delta, oos_frontier, read_frontier, write_frontier,
)
from .suites import divergence_for, dataset, known_law, run_suite, write_json

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

def _common(parser):
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="base seed (overrides the config)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser():
    parser = argparse.ArgumentParser(prog="drocal", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("frontier-bootstrap", "bootstrap frontier of the configured data set"),
        ("frontier-oos", "Monte-Carlo out-of-sample frontier under a known model"),
        ("calibrate", "choose delta by a calibration rule"),
    ]:
        _common(sub.add_parser(name, help=text))
    suite = sub.add_parser("run-suite", help="run a full experiment suite")
    suite.add_argument("suite", choices=EXPERIMENTS)
    _common(suite)
    return parser


def _load(args, **forced):
    overrides = list(args.overrides) + [f"{k}={v}" for k, v in forced.items()]
    return ExperimentConfig.load(args.config, overrides, args.seed)


def cmd_frontier_bootstrap(cfg, out):
    model, data = dataset(cfg)
    f = bootstrap_frontier(model, data, divergence_for(cfg), cfg.delta_grid, cfg.k, cfg.seed, tol=cfg.tol)
    path = write_frontier(f, out / "bootstrap.csv", {"config": cfg.to_dict()})
    return f"wrote {path}"


def cmd_frontier_oos(cfg, out):
    model, sampler, moments = known_law(cfg)
    f = oos_frontier(model, sampler, cfg.n, cfg.K, divergence_for(cfg), cfg.delta_grid, cfg.seed,
                     moments=moments, tol=cfg.tol)
    path = write_frontier(f, out / "oos.csv", {"config": cfg.to_dict()})
    return f"wrote {path}"


def cmd_calibrate(cfg, out):
    phi = divergence_for(cfg)
    model, data = dataset(cfg)
    result = {"rule": cfg.rule, "config": cfg.to_dict()}
    if cfg.rule == "highconfidence":
        rule = HighConfidence(cfg.alpha, model, data, phi, k=cfg.hc_k, seed=cfg.seed,
                              estimator=cfg.hc_estimator)
        delta, radius = high_confidence_delta(rule)
        result.update(delta=delta, radius=radius, alpha=cfg.alpha)
    else:
        if cfg.frontier_path is not None:
            f = read_frontier(cfg.frontier_path)
        else:
            f = bootstrap_frontier(model, data, phi, cfg.delta_grid, cfg.k, cfg.seed, tol=cfg.tol)
            write_frontier(f, out / "bootstrap.csv", {"config": cfg.to_dict()})
        if cfg.rule == "maxmean":
            rule = MaxMean()
        elif cfg.rule == "tradeoff":
            rule = MeanVarTradeoff(getattr(cfg, "lambda"))
        else:
            if cfg.target is None:
                raise ConfigError("satisficing rule needs a target")
            rule = Satisficing(cfg.target, model, data, phi, tol=cfg.tol)
        result["delta"] = calibrate(f, rule)
    write_json(result, out / "calibration.json")
    return f"delta = {result['delta']!r}"


def cmd_run_suite(cfg, out):
    summary = run_suite(cfg, out)
    return f"{summary['experiment']} suite written to {out}"


COMMANDS = {
    "frontier-bootstrap": cmd_frontier_bootstrap,
    "frontier-oos": cmd_frontier_oos,
    "calibrate": cmd_calibrate,
    "run-suite": cmd_run_suite,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        forced = {"experiment": args.suite} if args.command == "run-suite" else {}
        cfg = _load(args, **forced)
        message = COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ValueError) as exc:
        # ValueError: a setting the library rejects (e.g. k = 1 for the bootstrap)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
