"""
Campaigns: a chess scan, an adversarial search, a forecast run or a report,
executed end to end into an output directory.

Every campaign directory holds ``records.jsonl`` (one violation record per
line), ``inputs.jsonl`` (input id to FEN or question text), ``summary.csv``
and ``manifest.json``. Records already present in ``records.jsonl`` are not
recomputed, so an interrupted campaign is resumed by running it again.
"""

import concurrent.futures
import dataclasses
import enum
import json
import logging
import os
import random
import threading
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone

from tqdm import tqdm

from . import __version__
from .board import (is_forced, is_middle_game, is_symmetric_candidate,
                    random_pawnless, random_playout, read_positions, to_fen)
from .checks import CHECKS
from .evolve import GaConfig, GeneticSearch, random_search
from .forecast import OracleConfig, load_tuples, run_tuple
from .helpers import (AggregationError, ConfigError, ConsistError,
                      EngineStartupError, ProtocolError)
from .oracles import build_oracle
from .records import (CheckKind, InputMap, RecordSink, bucketize,
                      load_records, position_id, summarize, write_summary_csv)
from .settings import SAMPLE_TUPLES, CampaignSettings
from .uci import EngineConfig, EvaluationCache, HandlePool

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2
EXIT_ENGINE = 3

RECORDS_FILE = "records.jsonl"
INPUTS_FILE = "inputs.jsonl"
SUMMARY_FILE = "summary.csv"
MANIFEST_FILE = "manifest.json"
GA_STATS_FILE = "ga_stats.csv"
BASELINE_FILE = "baseline_records.jsonl"
RESPONSES_FILE = "responses.jsonl"

# scans of these checks keep middle-game positions only when reading a position file
MIDDLE_GAME_CHECKS = (CheckKind.POSITION_MIRRORING, CheckKind.FORCED_MOVE, CheckKind.RECOMMENDED_MOVE)
DEFAULT_GENERATED = 1000


class Mode(enum.Enum):
    CHESS_SCAN = "chess-scan"
    CHESS_EVOLVE = "chess-evolve"
    FORECAST_RUN = "forecast-run"
    REPORT = "report"


@dataclass
class CampaignConfig:
    mode: Mode
    output_dir: str = "runs/latest"
    settings: CampaignSettings = field(default_factory=CampaignSettings)
    checks: list = field(default_factory=lambda: list(CHECKS))
    positions: str = None
    generate: str = "pawnless"
    playout_plies: int = 40
    middle_game_only: bool = True
    engine: EngineConfig = None
    cache_path: str = None
    ga: GaConfig = None
    baseline: bool = False
    oracle: OracleConfig = None
    tuples: str = None
    records: str = None
    progress: bool = False

    def validate(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        mode = self.mode
        if mode in (Mode.CHESS_SCAN, Mode.CHESS_EVOLVE) and self.engine is None:
            raise ConfigError(f"{mode.value} needs an engine")
        if mode is Mode.CHESS_SCAN:
            self.checks = [CheckKind(c) if isinstance(c, str) else c for c in self.checks]
            if not self.checks or any(c not in CHECKS for c in self.checks):
                raise ConfigError(f"chess-scan checks must be among {', '.join(c.value for c in CHECKS)}")
            if self.positions and not os.path.isfile(self.positions):
                raise ConfigError(f"position file not found: {self.positions}")
            if self.generate not in ("pawnless", "playout"):
                raise ConfigError(f"Unknown position generator {self.generate!r}")
        elif mode is Mode.CHESS_EVOLVE:
            if self.ga is None:
                self.ga = GaConfig(seed=self.settings.seed, workers=self.settings.workers)
            if self.ga.report_threshold is None:
                self.ga.report_threshold = self.settings.thresholds[0]
        elif mode is Mode.FORECAST_RUN:
            self.tuples = self.tuples or SAMPLE_TUPLES
            if not os.path.isfile(self.tuples):
                raise ConfigError(f"tuple file not found: {self.tuples}")
            self.oracle = self.oracle or OracleConfig()
        elif mode is Mode.REPORT:
            if not self.records or not os.path.isfile(self.records):
                raise ConfigError(f"record file not found: {self.records}")
        return self

    def path(self, name):
        return os.path.join(self.output_dir, name)


@dataclass
class CampaignResult:
    status: int
    output_dir: str
    summaries: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


class JsonlArchive:
    """Locked appender for audit logs"""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()

    def __call__(self, item):
        line = json.dumps(item, ensure_ascii=False) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


@dataclass
class _Outcome:
    case_id: str
    record: object = None
    inputs: dict = None
    failure: str = None
    protocol: bool = False


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(config, manifest):
    manifest["finished"] = _now()
    with open(config.path(MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _engine_manifest(config, evaluator):
    engine = config.engine
    return {"identity": evaluator.identity, "flavor": engine.flavor.value, "node_limit": engine.node_limit,
            "options": {str(k): v for k, v in engine.options.items()}, "weights": engine.weights,
            "mock": engine.mock or None}


def _start_evaluator(config):
    cache = EvaluationCache(config.cache_path)
    return HandlePool.start(config.engine, size=config.settings.workers, cache=cache), cache


def _map_in_order(config, fn, items):
    """Apply ``fn`` over ``items`` on the configured workers, yielding in input order"""
    workers = config.settings.workers
    bar = tqdm(total=len(items), disable=not config.progress, unit="case")
    try:
        if workers == 1:
            for item in items:
                yield fn(item)
                bar.update()
        else:
            with concurrent.futures.ThreadPoolExecutor(workers) as executor:
                for result in executor.map(fn, items):
                    yield result
                    bar.update()
    finally:
        bar.close()


def scan_boards(config, rng):
    """Positions of a scan, deduplicated by FEN; returns ``(boards, duplicates)``"""
    cap = config.settings.sample_cap
    if config.positions:
        boards = read_positions(config.positions)
    elif config.generate == "pawnless":
        boards = [random_pawnless(rng) for _ in range(cap or DEFAULT_GENERATED)]
    else:
        boards = [random_playout(rng, config.playout_plies) for _ in range(cap or DEFAULT_GENERATED)]
    unique, seen = [], set()
    for board in boards:
        fen = to_fen(board)
        if fen not in seen:
            seen.add(fen)
            unique.append(board)
    duplicates = len(boards) - len(unique)
    if duplicates:
        log.info("dropped %d duplicate positions", duplicates)
    return unique[:cap] if cap else unique, duplicates


def skip_reason(check, board, middle_game_only):
    """Why ``check`` does not apply to ``board``, or None"""
    if check is CheckKind.BOARD_TRANSFORMATIONS and not is_symmetric_candidate(board):
        return "pawns or castling rights"
    if check is CheckKind.FORCED_MOVE and not is_forced(board):
        return "not a forced move"
    if check is CheckKind.RECOMMENDED_MOVE and not any(board.legal_moves):
        return "no legal move"
    if middle_game_only and check in MIDDLE_GAME_CHECKS and not is_middle_game(board):
        return "not a middle-game position"
    return None


def _run_case(evaluator, item):
    check, board, case_id = item
    try:
        case = CHECKS[check](evaluator, board)
        return _Outcome(case_id, record=case.to_record(case_id), inputs=case.input_map())
    except ProtocolError as e:
        log.warning("case %s: protocol error: %s", case_id, e)
        return _Outcome(case_id, failure=str(e), protocol=True)
    except ConsistError as e:
        log.warning("case %s failed: %s", case_id, e)
        return _Outcome(case_id, failure=str(e))
    except Exception as e:
        log.exception("case %s failed unexpectedly", case_id)
        return _Outcome(case_id, failure=repr(e))


def _run_scan(config, manifest):
    settings = config.settings
    rng = random.Random(settings.seed)
    boards, duplicates = scan_boards(config, rng)
    middle_game_only = config.middle_game_only and bool(config.positions)

    sink = RecordSink(config.path(RECORDS_FILE))
    inputs = InputMap(config.path(INPUTS_FILE))
    done = sink.case_ids()
    skipped = Counter()
    items = []
    for board in boards:
        fen_id = position_id(to_fen(board))
        for check in config.checks:
            case_id = f"{check.value}/{fen_id}"
            reason = skip_reason(check, board, middle_game_only)
            if reason:
                skipped[reason] += 1
            elif case_id in done:
                skipped["already recorded"] += 1
            else:
                items.append((check, board, case_id))
    log.info("scan of %d positions: %d cases to run, %d skipped", len(boards), len(items), sum(skipped.values()))

    evaluator, cache = _start_evaluator(config)
    manifest["engine"] = _engine_manifest(config, evaluator)
    failures = protocol_errors = written = 0
    try:
        for outcome in _map_in_order(config, lambda item: _run_case(evaluator, item), items):
            if outcome.record is not None:
                sink.append(outcome.record)
                for input_id, fen in outcome.inputs.items():
                    inputs.add(input_id, fen)
                written += 1
            elif outcome.protocol:
                protocol_errors += 1
            else:
                failures += 1
    finally:
        evaluator.close()
        cache.save()

    attempted = len(items)
    failure_rate = (failures + protocol_errors) / attempted if attempted else 0.0
    records = load_records(sink.path) if os.path.exists(sink.path) else []
    records = [r for r in records if r.check in config.checks]
    summaries = summarize(records, settings.thresholds, settings.epsilon)
    write_summary_csv(summaries, config.path(SUMMARY_FILE), epsilon=settings.epsilon)
    manifest.update(positions=len(boards), duplicates=duplicates, cases=attempted, records_written=written,
                    skipped=dict(skipped), failures=failures, protocol_errors=protocol_errors,
                    failure_rate=failure_rate, cache_hits=cache.hits,
                    checks=[c.value for c in config.checks])
    return _status(failure_rate, settings), summaries


def _status(failure_rate, settings):
    if failure_rate > settings.max_failure_rate:
        log.error("failure rate %.2f%% exceeds %.2f%%", 100 * failure_rate, 100 * settings.max_failure_rate)
        return EXIT_FAILURES
    return EXIT_OK


def _search_summary(records, evaluated, label, settings):
    summary = bucketize([r.value for r in records], settings.thresholds)
    summary.total = evaluated
    summary.label = label
    return summary


def _run_evolve(config, manifest):
    settings, ga = config.settings, config.ga
    sink = RecordSink(config.path(RECORDS_FILE))
    inputs = InputMap(config.path(INPUTS_FILE))
    done = sink.case_ids()

    evaluator, cache = _start_evaluator(config)
    manifest["engine"] = _engine_manifest(config, evaluator)
    try:
        search = GeneticSearch(ga, evaluator)
        records, stats = search.run()
        fresh = [r for r in records if r.case_id not in done]
        sink.extend(fresh)
        for input_id, fen in search.input_map.items():
            inputs.add(input_id, fen)
        stats.write_csv(config.path(GA_STATS_FILE))
        summaries = [_search_summary(records, stats.evaluated, "adversarial", settings)]
        manifest["ga"] = dataclasses.asdict(ga)
        manifest.update(budget_used=stats.budget_used, restarts=stats.restarts, evaluated=stats.evaluated,
                        dead=stats.dead, truncated=stats.truncated, records_written=len(fresh))

        if config.baseline:
            baseline, baseline_stats = random_search(ga.eval_budget, evaluator, random.Random(ga.seed + 1),
                                                     ga.report_threshold)
            baseline_path = config.path(BASELINE_FILE)
            if os.path.exists(baseline_path):
                os.remove(baseline_path)
            RecordSink(baseline_path).extend(baseline)
            summaries.append(_search_summary(baseline, baseline_stats.evaluated, "random", settings))
            manifest["baseline_budget_used"] = baseline_stats.budget_used
    finally:
        evaluator.close()
        cache.save()

    write_summary_csv(summaries, config.path(SUMMARY_FILE), label_name="search", epsilon=settings.epsilon)
    failure_rate = stats.dead / max(1, stats.evaluated + stats.dead)
    manifest["failure_rate"] = failure_rate
    return _status(failure_rate, settings), summaries


def _run_forecast(config, manifest):
    settings, oracle_config = config.settings, config.oracle
    tuples = load_tuples(config.tuples)
    sink = RecordSink(config.path(RECORDS_FILE))
    inputs = InputMap(config.path(INPUTS_FILE))
    archive = JsonlArchive(config.path(RESPONSES_FILE))
    done = sink.case_ids()
    pending = [t for t in tuples if t.id not in done]
    oracle = build_oracle(oracle_config)

    def work(tup):
        try:
            return tup, run_tuple(oracle_config, tup, oracle, archive), None
        except AggregationError as e:
            return tup, None, str(e)

    skipped, written = [], 0
    for tup, record, reason in _map_in_order(config, work, pending):
        if record is None:
            skipped.append({"id": tup.id, "reason": reason})
            continue
        sink.append(record)
        for question_id, question in zip(tup.question_ids(), tup.questions):
            inputs.add(question_id, question)
        written += 1

    records = load_records(sink.path) if os.path.exists(sink.path) else []
    summaries = summarize(records, settings.thresholds, settings.epsilon)
    write_summary_csv(summaries, config.path(SUMMARY_FILE), epsilon=settings.epsilon)
    skip_rate = len(skipped) / len(pending) if pending else 0.0
    manifest.update(oracle={k: v for k, v in dataclasses.asdict(oracle_config).items()},
                    tuples=len(tuples), resumed=len(tuples) - len(pending), records_written=written,
                    skipped=skipped, skip_rate=skip_rate)
    log.info("forecast run: %d records, %d tuples skipped", written, len(skipped))
    return EXIT_OK, summaries


def _run_report(config, manifest):
    settings = config.settings
    records = load_records(config.records)
    summaries = summarize(records, settings.thresholds, settings.epsilon)
    write_summary_csv(summaries, config.path(SUMMARY_FILE), epsilon=settings.epsilon)
    manifest.update(records=config.records, total=len(records))
    return EXIT_OK, summaries


_RUNNERS = {
    Mode.CHESS_SCAN: _run_scan,
    Mode.CHESS_EVOLVE: _run_evolve,
    Mode.FORECAST_RUN: _run_forecast,
    Mode.REPORT: _run_report,
}


def run_campaign(config):
    """Run one campaign; configuration and engine startup problems give a nonzero status"""
    try:
        config.validate()
    except ConfigError as e:
        log.error("invalid configuration: %s", e)
        return CampaignResult(EXIT_CONFIG, config.output_dir)

    os.makedirs(config.output_dir, exist_ok=True)
    manifest = {"mode": config.mode.value, "version": __version__, "seed": config.settings.seed,
                "workers": config.settings.workers, "thresholds": config.settings.thresholds,
                "started": _now()}
    try:
        status, summaries = _RUNNERS[config.mode](config, manifest)
    except EngineStartupError as e:
        log.error("engine failed to start: %s", e)
        manifest["error"] = str(e)
        status, summaries = EXIT_ENGINE, []
    except ConfigError as e:
        log.error("invalid configuration: %s", e)
        manifest["error"] = str(e)
        status, summaries = EXIT_CONFIG, []
    manifest["status"] = status
    _write_manifest(config, manifest)
    return CampaignResult(status, config.output_dir, summaries, manifest)


def sweep_nodes(config, node_list, sweep_dir=None):
    """
    Repeat a chess scan for each node limit. Writes one CSV per check with a
    row per node limit; returns ``{check: [summary, ...]}``.
    """
    config.validate()
    if config.mode is not Mode.CHESS_SCAN:
        raise ConfigError("a node sweep needs a chess-scan campaign")
    sweep_dir = sweep_dir or config.output_dir
    rows = {}
    for nodes in node_list:
        run = dataclasses.replace(config, output_dir=os.path.join(sweep_dir, f"nodes-{nodes}"),
                                  engine=dataclasses.replace(config.engine, node_limit=nodes))
        result = run_campaign(run)
        if result.status != EXIT_OK:
            raise ConsistError(f"sweep run at {nodes} nodes failed with status {result.status}")
        by_check = {s.label: s for s in result.summaries}
        for check in run.checks:
            summary = by_check.get(check.value) or bucketize([], config.settings.thresholds)
            summary.label = str(nodes)
            rows.setdefault(check, []).append(summary)
    for check, summaries in rows.items():
        write_summary_csv(summaries, os.path.join(sweep_dir, f"sweep-{check.value}.csv"),
                          label_name="nodes", epsilon=config.settings.epsilon)
    return rows
