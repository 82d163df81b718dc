#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Command line entry point: ``pyconsist <subcommand> [options]``"""

import argparse
import logging
import os
import sys

import yaml

from . import __version__
from .campaign import EXIT_CONFIG, EXIT_OK, CampaignConfig, Mode, run_campaign, sweep_nodes
from .evolve import GaConfig
from .forecast import OracleConfig
from .helpers import ConfigError, ConsistError
from .records import format_summary
from .settings import CampaignSettings, engine_config, load_config, merge_settings
from .uci import CpMapping

log = logging.getLogger("consist")

DEFAULTS = {
    "output": "runs/latest",
    "engine": "mock-material",
    "generate": "pawnless",
    "plies": 40,
    "oracle": "chat",
}


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _words(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _option(text):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name.strip(), yaml.safe_load(value)


def _common(parser):
    group = parser.add_argument_group("campaign")
    group.add_argument("--config", help="YAML file supplying any of these options")
    group.add_argument("-o", "--output", help="output directory (default runs/latest)")
    group.add_argument("--seed", type=int)
    group.add_argument("--workers", type=int)
    group.add_argument("--thresholds", type=_floats, help="comma separated, ascending")
    group.add_argument("--epsilon", type=float, help="strong violation threshold for forecasts")
    group.add_argument("--max-failure-rate", type=float)
    group.add_argument("--progress", action="store_true", default=None)
    group.add_argument("-v", "--verbose", action="count", default=0)


def _engine(parser):
    group = parser.add_argument_group("engine")
    group.add_argument("--engine", help="preset name from engines.yaml (default mock-material)")
    group.add_argument("--executable")
    group.add_argument("--weights")
    group.add_argument("--node-limit", type=int)
    group.add_argument("--option", type=_option, action="append", help="extra engine option NAME=VALUE")
    group.add_argument("--cache", help="pickle file persisting evaluations between runs")
    group.add_argument("--cp-mapping", choices=("logistic", "sf12", "lichess"))
    group.add_argument("--cp-scale", type=float)
    group.add_argument("--handshake-timeout", type=float)
    group.add_argument("--eval-timeout", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="pyconsist", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser(Mode.CHESS_SCAN.value, help="run consistency checks over positions")
    _common(scan)
    _engine(scan)
    scan.add_argument("--checks", type=_words, help="comma separated check names (default all four)")
    scan.add_argument("--positions", help="FEN/EPD file; random positions are generated without it")
    scan.add_argument("--generate", choices=("pawnless", "playout"))
    scan.add_argument("--plies", type=int, help="length of random playouts")
    scan.add_argument("--sample-cap", type=int)
    scan.add_argument("--all-positions", action="store_true", default=None,
                      help="do not restrict position files to middle-game positions")
    scan.add_argument("--sweep-nodes", type=_ints, help="repeat the scan for each node limit")

    evolve = sub.add_parser(Mode.CHESS_EVOLVE.value, help="search for inconsistent pawnless boards")
    _common(evolve)
    _engine(evolve)
    evolve.add_argument("--population", type=int)
    evolve.add_argument("--generations", type=int)
    evolve.add_argument("--tournament-fraction", type=float)
    evolve.add_argument("--budget", type=int, help="logical evaluations")
    evolve.add_argument("--patience", type=int)
    evolve.add_argument("--no-elitism", action="store_true", default=None)
    evolve.add_argument("--report-threshold", type=float)
    evolve.add_argument("--baseline", action="store_true", default=None,
                        help="also run random sampling with the same budget")

    forecast = sub.add_parser(Mode.FORECAST_RUN.value, help="query a forecasting oracle with question tuples")
    _common(forecast)
    forecast.add_argument("--tuples", help="tuple file (default: bundled synthetic sample)")
    forecast.add_argument("--oracle", choices=("chat", "scripted", "fixed"))
    forecast.add_argument("--script", help="YAML mapping question to answers, for --oracle scripted")
    forecast.add_argument("--fixed-response")
    forecast.add_argument("--model")
    forecast.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    forecast.add_argument("--api-key-env")
    forecast.add_argument("--temperature", type=float)
    forecast.add_argument("--repeats", type=int)
    forecast.add_argument("--prompt", help="probability, quantity, negation-aware or paraphrase-aware")
    forecast.add_argument("--rpm", type=float, help="request rate limit per minute")

    report = sub.add_parser(Mode.REPORT.value, help="summarize an existing record file")
    _common(report)
    report.add_argument("records", nargs="?")
    return parser


def configure_logging(verbose):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def _settings(values):
    return CampaignSettings.from_mapping({
        "seed": values.get("seed"),
        "workers": values.get("workers"),
        "thresholds": values.get("thresholds"),
        "epsilon": values.get("epsilon"),
        "max_failure_rate": values.get("max_failure_rate"),
        "node_limit": values.get("node_limit"),
        "sample_cap": values.get("sample_cap"),
        "handshake_timeout": values.get("handshake_timeout"),
        "eval_timeout": values.get("eval_timeout"),
        "cp_scale": values.get("cp_scale"),
    })


def _engine_config(values, settings):
    options = dict(values.get("options") or {})
    options.update(dict(values.get("option") or []))
    mapping = None
    if values.get("cp_mapping") or values.get("cp_scale"):
        mapping = CpMapping(kind=values.get("cp_mapping") or "logistic", scale=settings.cp_scale)
    return engine_config(values["engine"], executable=values.get("executable"), weights=values.get("weights"),
                         node_limit=values.get("node_limit"), options=options,
                         handshake_timeout=values.get("handshake_timeout"),
                         eval_timeout=values.get("eval_timeout"), cp_mapping=mapping)


def build_config(args):
    """Campaign configuration from parsed arguments and the optional config file"""
    cli_values = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    file_values = load_config(args.config, section=args.command) if args.config else {}
    values = merge_settings(DEFAULTS, file_values, cli_values)
    settings = _settings(values)
    mode = Mode(args.command)
    config = CampaignConfig(mode=mode, output_dir=values["output"], settings=settings,
                            progress=bool(values.get("progress")))

    if mode in (Mode.CHESS_SCAN, Mode.CHESS_EVOLVE):
        config.engine = _engine_config(values, settings)
        config.cache_path = values.get("cache")
    if mode is Mode.CHESS_SCAN:
        if values.get("checks"):
            checks = values["checks"]
            config.checks = _words(checks) if isinstance(checks, str) else list(checks)
        config.positions = values.get("positions")
        config.generate = values["generate"]
        config.playout_plies = int(values["plies"])
        config.middle_game_only = not values.get("all_positions")
    elif mode is Mode.CHESS_EVOLVE:
        ga = {"population_size": values.get("population"), "max_generations": values.get("generations"),
              "tournament_fraction": values.get("tournament_fraction"), "eval_budget": values.get("budget"),
              "early_stop_patience": values.get("patience"), "report_threshold": values.get("report_threshold")}
        ga = {k: v for k, v in ga.items() if v is not None}
        config.ga = GaConfig(seed=settings.seed, workers=settings.workers,
                             elitism=not values.get("no_elitism"), **ga)
        config.baseline = bool(values.get("baseline"))
    elif mode is Mode.FORECAST_RUN:
        oracle = {"kind": values.get("oracle"), "script": values.get("script"),
                  "fixed_response": values.get("fixed_response"), "model_name": values.get("model"),
                  "endpoint": values.get("endpoint"), "api_key_env": values.get("api_key_env"),
                  "temperature": values.get("temperature"), "repeats": values.get("repeats"),
                  "system_prompt": values.get("prompt"), "requests_per_minute": values.get("rpm")}
        config.oracle = OracleConfig(**{k: v for k, v in oracle.items() if v is not None})
        config.tuples = values.get("tuples")
    elif mode is Mode.REPORT:
        config.records = values.get("records")
    return config, values


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config, values = build_config(args)
        if config.mode is Mode.CHESS_SCAN and values.get("sweep_nodes"):
            rows = sweep_nodes(config, values["sweep_nodes"])
            for check, summaries in rows.items():
                print(f"[{check.value}] rows are node limits")
                print(format_summary(summaries))
            return EXIT_OK
        result = run_campaign(config)
    except ConfigError as e:
        log.error("invalid configuration: %s", e)
        return EXIT_CONFIG
    except ConsistError as e:
        log.error("%s", e)
        return 1

    if result.summaries:
        print(format_summary(result.summaries))
    print(f"results in {os.path.abspath(result.output_dir)}", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
