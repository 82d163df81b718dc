"""
UCI engine bridge.

Engines are driven through ``chess.engine.SimpleEngine``; this module adds the
deterministic option handshake, score-domain conversions, an evaluation cache
shared by handles and a pool that hands each handle to one worker at a time.
"""

import abc
import asyncio
import collections
import concurrent.futures
import contextlib
import enum
import json
import logging
import math
import os
import queue
import re
import shutil
import threading
import warnings
from dataclasses import dataclass, field

import chess
import chess.engine

from .board import require_legal, to_fen
from .helpers import (ConfigError, EngineError, EngineStartupError,
                      EngineTransportError, InvariantError, ProtocolError,
                      hash_file, hashpath, init_positive, load_cache,
                      save_cache)

log = logging.getLogger(__name__)

# tolerance for rounding in q_d_to_winprob before the result is called inconsistent
WINPROB_SLACK = 1e-9
CP_KINDS = ("logistic", "sf12", "lichess")
_TIMEOUTS = (TimeoutError, asyncio.TimeoutError, concurrent.futures.TimeoutError)


class Flavor(enum.Enum):
    LEELA = "leela"
    STOCKFISH = "stockfish"
    MOCK = "mock"


@dataclass(frozen=True)
class CpMapping:
    """
    Centipawn to q conversion. ``logistic`` is ``2 * sigmoid(cp / scale) - 1``;
    the other kinds are the WDL models bundled with python-chess, evaluated at
    game ply ``ply``.
    """
    kind: str = "logistic"
    scale: float = 300.0
    ply: int = 30

    def __post_init__(self):
        if self.kind not in CP_KINDS:
            raise ConfigError(f"Unknown centipawn mapping {self.kind!r}. Use one of {', '.join(CP_KINDS)}")
        if not self.scale > 0:
            raise ConfigError(f"Invalid centipawn scale: {self.scale}. Must be > 0")


@dataclass
class EngineConfig:
    executable: str
    options: dict = field(default_factory=dict)
    node_limit: int = 400
    flavor: Flavor = Flavor.STOCKFISH
    weights: str = None
    args: list = field(default_factory=list)
    name: str = ""
    handshake_timeout: float = 30.0
    eval_timeout: float = 300.0
    cp_mapping: CpMapping = field(default_factory=CpMapping)
    # mock flavor only: "material" or "planted-bug" plus its parameters
    mock: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.flavor, str):
            self.flavor = Flavor(self.flavor)
        if isinstance(self.cp_mapping, dict):
            self.cp_mapping = CpMapping(**self.cp_mapping)
        init_positive("node_limit", self.node_limit)
        for name in self.options:
            if not str(name).strip():
                raise ConfigError("Engine option names must be nonempty")
        if self.handshake_timeout <= 0 or self.eval_timeout <= 0:
            raise ConfigError("Engine timeouts must be positive")

    @property
    def weights_option(self):
        return "WeightsFile" if self.flavor is Flavor.LEELA else "EvalFile"

    @property
    def command(self):
        return [self.executable] + [str(a) for a in self.args]


class ScoreKind(enum.Enum):
    Q_VALUE = "q"
    CENTIPAWN = "cp"
    WDL_PERMILLE = "wdl"
    MATE_IN = "mate"


@dataclass(frozen=True)
class RawScore:
    kind: ScoreKind
    value: object

    def __post_init__(self):
        if self.kind is ScoreKind.WDL_PERMILLE:
            _check_wdl(*self.value)

    def __str__(self):
        if self.kind is ScoreKind.WDL_PERMILLE:
            return "wdl %d %d %d" % tuple(self.value)
        return f"{self.kind.value} {self.value}"


@dataclass(frozen=True)
class Evaluation:
    """An engine verdict, always from the side to move"""
    q: float
    draw_prob: float = None
    best_move: chess.Move = None
    nodes_used: int = 0
    raw: RawScore = None
    degraded: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.q) and -1.0 <= self.q <= 1.0):
            raise ProtocolError(f"q out of range: {self.q}")
        if self.draw_prob is not None and not 0.0 <= self.draw_prob <= 1.0:
            raise ProtocolError(f"draw probability out of range: {self.draw_prob}")

    @property
    def win_prob(self):
        if self.draw_prob is None:
            return None
        return q_d_to_winprob(self.q, self.draw_prob)


def _check_wdl(w, d, l):
    if min(w, d, l) < 0 or w + d + l != 1000:
        raise ProtocolError(f"WDL must be nonnegative per-mille values summing to 1000: {w} {d} {l}")


def wdl_to_q(w, d, l):
    """Per-mille win/draw/loss to ``(q, draw_prob)``"""
    _check_wdl(w, d, l)
    return (w - l) / 1000, d / 1000


def q_d_to_winprob(q, d):
    """Win probability (q + 1 - d) / 2; the implied loss probability must not be negative either"""
    p = (q + 1 - d) / 2
    loss = (1 - q - d) / 2
    if not (-1.0 <= q <= 1.0 and 0.0 <= d <= 1.0) or min(p, loss) < -WINPROB_SLACK:
        raise InvariantError(f"Inconsistent engine output: q={q}, d={d} gives win probability {p}")
    return min(1.0, max(0.0, p))


def cp_to_q(cp, mapping=None):
    """Monotone odd map from centipawns to q; infinite scores clamp to +-1"""
    mapping = mapping or CpMapping()
    if math.isinf(cp):
        return math.copysign(1.0, cp)
    if mapping.kind == "logistic":
        # 2 * sigmoid(x) - 1 == tanh(x / 2), and tanh is odd in floating point
        return math.tanh(cp / (2 * mapping.scale))
    wdl = chess.engine.Cp(int(cp)).wdl(model=mapping.kind, ply=mapping.ply)
    return wdl_to_q(wdl.wins, wdl.draws, wdl.losses)[0]


def mate_to_q(score):
    """Mate scores are certain results: +1 when the side to move mates"""
    return 1.0 if score > chess.engine.Cp(0) else -1.0


# Accepted VerboseMoveStats grammar: a line starting with a UCI move (or
# "node"), followed by any number of parenthesised "KEY: number" fields, e.g.
#   e2e4  (322 ) N:  120 (+ 3) (P: 12.40%) (WL: 0.02) (D: 0.512) (Q: 0.0213)
# Only parenthesised fields are read; unknown keys are kept, numbers may end in %.
_VERBOSE_HEAD = re.compile(r"^\s*(?P<move>[a-h][1-8][a-h][1-8][qrbn]?|node)\b")
_VERBOSE_FIELD = re.compile(r"\(\s*(?P<key>[A-Za-z]+)\s*:\s*(?P<value>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*%?\s*\)")


def parse_verbose_stats(line):
    """Return ``(move, fields)`` for a VerboseMoveStats line, or None"""
    head = _VERBOSE_HEAD.match(line)
    if not head:
        return None
    fields = {m.group("key"): float(m.group("value")) for m in _VERBOSE_FIELD.finditer(line)}
    if not fields:
        return None
    return head.group("move"), fields


def _move_spellings(board, move):
    """UCI spellings of a move, including king-takes-rook castling"""
    spellings = {move.uci()}
    if board.is_castling(move):
        rank = chess.square_rank(move.from_square)
        rook_file = 7 if chess.square_file(move.to_square) > chess.square_file(move.from_square) else 0
        spellings.add(chess.square_name(move.from_square) + chess.square_name(chess.square(rook_file, rank)))
    return spellings


def _render_info(info):
    parts = []
    for key in ("depth", "nodes", "score", "wdl", "pv", "string"):
        if key not in info:
            continue
        value = info[key]
        if key == "pv":
            value = " ".join(m.uci() for m in value)
        elif key in ("score", "wdl"):
            value = value.relative
        parts.append(f"{key} {value}")
    return "info " + " ".join(parts)


class Evaluator(abc.ABC):
    """Anything that turns a legal board into an Evaluation"""
    flavor = Flavor.MOCK
    identity = ""
    node_limit = 400

    @abc.abstractmethod
    def evaluate(self, board, node_limit=None):
        pass

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class EvaluationCache:
    """
    Thread-safe map from (engine identity, canonical FEN, node limit) to
    Evaluation, optionally persisted as a pickle file.
    """

    def __init__(self, path=None):
        self.path = path
        self._lock = threading.Lock()
        self._entries = load_cache(path) or {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(identity, fen, node_limit):
        return hashpath(f"{identity}\n{fen}\n{node_limit}")

    def get(self, identity, fen, node_limit):
        key = self.key(identity, fen, node_limit)
        with self._lock:
            found = self._entries.get(key)
            if found is None:
                self.misses += 1
            else:
                self.hits += 1
            return found

    def put(self, identity, fen, node_limit, evaluation):
        with self._lock:
            self._entries[self.key(identity, fen, node_limit)] = evaluation

    def __len__(self):
        return len(self._entries)

    def save(self):
        if not self.path:
            return
        with self._lock:
            snapshot = dict(self._entries)
        save_cache(self.path, snapshot)
        log.debug("saved %d cached evaluations to %s", len(snapshot), self.path)


def engine_identity(config, reported_name=""):
    """Executable hash, option set and weights hash; the cache key prefix"""
    executable = shutil.which(config.executable) or config.executable
    parts = [reported_name or os.path.basename(config.executable),
             (hash_file(executable) or "nohash")[:12],
             json.dumps([a for a in config.args], sort_keys=True),
             json.dumps({str(k): str(v) for k, v in config.options.items()}, sort_keys=True)]
    if config.weights:
        parts.append("weights=" + (hash_file(config.weights) or config.weights)[:12])
    return "|".join(parts)


class EngineHandle(Evaluator):
    """
    One engine process. Not safe for concurrent use: a handle serves a single
    request at a time (see HandlePool).
    """

    def __init__(self, config, engine, identity, cache=None):
        self.config = config
        self.engine = engine
        self.identity = identity
        self.cache = cache
        self.flavor = config.flavor
        self.node_limit = config.node_limit
        self._tail = collections.deque(maxlen=40)
        self._executor = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        self._closed = False
        self.degraded_count = 0

    @property
    def tail(self):
        return list(self._tail)

    def evaluate(self, board, node_limit=None):
        if self._closed:
            raise EngineTransportError(f"engine {self.identity} is closed", self._tail)
        nodes = init_positive("node_limit", node_limit or self.node_limit)
        require_legal(board)
        fen = to_fen(board)
        if self.cache is not None:
            cached = self.cache.get(self.identity, fen, nodes)
            if cached is not None:
                return cached

        future = self._executor.submit(self._search, board.copy(stack=False), nodes)
        try:
            infos, best = future.result(timeout=self.config.eval_timeout)
        except concurrent.futures.TimeoutError:
            self.close()
            raise EngineTransportError(f"search of {fen} exceeded {self.config.eval_timeout}s", self._tail)
        except chess.engine.EngineTerminatedError as e:
            self.close()
            raise EngineTransportError(f"engine died while searching {fen}: {e}", self._tail) from e
        except chess.engine.EngineError as e:
            raise ProtocolError(f"engine rejected search of {fen}: {e}") from e

        evaluation = self._interpret(board, infos, best, nodes)
        if self.cache is not None:
            self.cache.put(self.identity, fen, nodes, evaluation)
        return evaluation

    def _search(self, board, nodes):
        infos = []
        self._tail.append(f"position fen {to_fen(board)}")
        self._tail.append(f"go nodes {nodes}")
        with self.engine.analysis(board, chess.engine.Limit(nodes=nodes), info=chess.engine.INFO_ALL) as analysis:
            for info in analysis:
                infos.append(info)
                self._tail.append(_render_info(info))
            best = analysis.wait()
        self._tail.append(f"bestmove {best.move.uci() if best.move else '(none)'}")
        return infos, best.move

    def _interpret(self, board, infos, best_move, nodes):
        if best_move is not None and not board.is_legal(best_move):
            raise ProtocolError(f"engine proposed illegal move {best_move.uci()} in {to_fen(board)}")
        nodes_used = next((i["nodes"] for i in reversed(infos) if "nodes" in i), nodes)
        common = dict(best_move=best_move, nodes_used=nodes_used)

        if self.flavor is Flavor.LEELA and best_move is not None:
            stats = self._verbose_stats(board, infos, best_move)
            if stats is not None and "Q" in stats:
                q = max(-1.0, min(1.0, stats["Q"]))
                d = stats.get("D")
                return Evaluation(q=q, draw_prob=d, raw=RawScore(ScoreKind.Q_VALUE, q), **common)

        wdl_info = next((i for i in reversed(infos) if "wdl" in i), None)
        if wdl_info is not None:
            wdl = wdl_info["wdl"].relative
            q, d = wdl_to_q(wdl.wins, wdl.draws, wdl.losses)
            return Evaluation(q=q, draw_prob=d, raw=RawScore(ScoreKind.WDL_PERMILLE, tuple(wdl)), **common)

        score_info = next((i for i in reversed(infos) if "score" in i), None)
        if score_info is None:
            raise ProtocolError(f"no score in engine output for {to_fen(board)}")
        score = score_info["score"].relative
        if score.is_mate():
            return Evaluation(q=mate_to_q(score), raw=RawScore(ScoreKind.MATE_IN, score.mate()), **common)

        degraded = self.flavor is Flavor.LEELA
        if degraded:
            self.degraded_count += 1
            warnings.warn(f"{self.identity}: no q/d statistics, using centipawn mapping "
                          f"{self.config.cp_mapping.kind}")
        return Evaluation(q=cp_to_q(score.score(), self.config.cp_mapping),
                          raw=RawScore(ScoreKind.CENTIPAWN, score.score()),
                          degraded=degraded, **common)

    def _verbose_stats(self, board, infos, best_move):
        spellings = _move_spellings(board, best_move)
        found = None
        for info in infos:
            parsed = parse_verbose_stats(info.get("string", ""))
            if parsed and parsed[0] in spellings:
                found = parsed[1]  # the last block printed wins
        return found

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self.engine.quit()
        except (chess.engine.EngineError, chess.engine.EngineTerminatedError, OSError) + _TIMEOUTS:
            try:
                self.engine.close()
            except Exception:
                log.debug("engine %s already gone", self.identity)
        self._executor.shutdown(wait=False)


def start_engine(config, cache=None):
    """Spawn and configure an engine; the mock flavor never spawns a process"""
    if config.flavor is Flavor.MOCK:
        from .mocks import build_mock
        return build_mock(config)

    if not (shutil.which(config.executable) or os.path.isfile(config.executable)):
        raise EngineStartupError(f"engine executable not found: {config.executable}")
    try:
        engine = chess.engine.SimpleEngine.popen_uci(config.command, timeout=config.handshake_timeout)
    except (OSError, chess.engine.EngineError, chess.engine.EngineTerminatedError) + _TIMEOUTS as e:
        raise EngineStartupError(f"cannot start {' '.join(config.command)}: {e!r}") from e

    options = dict(config.options)
    if config.weights:
        options[config.weights_option] = config.weights
    for name, value in options.items():
        try:
            engine.configure({name: value})
        except (chess.engine.EngineError, ValueError) as e:
            engine.quit()
            raise EngineStartupError(f"engine rejected option {name!r}={value!r}: {e}") from e

    try:
        engine.ping()
    except (chess.engine.EngineError, chess.engine.EngineTerminatedError) + _TIMEOUTS as e:
        engine.close()
        raise EngineStartupError(f"engine did not answer isready: {e!r}") from e

    identity = engine_identity(config, engine.id.get("name", ""))
    log.info("started %s (%s flavor, %d nodes)", identity, config.flavor.value, config.node_limit)
    return EngineHandle(config, engine, identity, cache)


def evaluate(handle, board, node_limit=None):
    return handle.evaluate(board, node_limit)


class HandlePool(Evaluator):
    """A set of independent handles, each lent to one caller at a time"""

    def __init__(self, handles):
        if not handles:
            raise EngineError("HandlePool needs at least one handle")
        self.handles = list(handles)
        self.identity = self.handles[0].identity
        self.flavor = self.handles[0].flavor
        self.node_limit = self.handles[0].node_limit
        self._idle = queue.Queue()
        for handle in self.handles:
            self._idle.put(handle)

    @classmethod
    def start(cls, config, size=1, cache=None):
        handles = []
        try:
            for _ in range(init_positive("pool size", size)):
                handles.append(start_engine(config, cache))
        except EngineError:
            for handle in handles:
                handle.close()
            raise
        return cls(handles)

    @contextlib.contextmanager
    def acquire(self):
        handle = self._idle.get()
        try:
            yield handle
        finally:
            self._idle.put(handle)

    def evaluate(self, board, node_limit=None):
        with self.acquire() as handle:
            return handle.evaluate(board, node_limit)

    def __len__(self):
        return len(self.handles)

    def close(self):
        for handle in self.handles:
            handle.close()
