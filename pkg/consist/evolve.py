"""
Adversarial search for pawnless boards whose evaluation changes under a
180 degree rotation.

A generational genetic algorithm with tournament selection, a piece-pair
crossover and seven mutation rules. Each fitness call costs two logical
evaluations; the search restarts from a fresh random population whenever the
best fitness stalls, until the evaluation budget is spent.
"""

import concurrent.futures
import csv
import enum
import json
import logging
import math
import random
from dataclasses import dataclass, field

import chess

from .board import (FLIPS, NON_KING_KINDS, ROTATIONS, Symmetry,
                     all_symmetries, apply_symmetry, is_symmetric_candidate,
                     random_pawnless, to_fen)
from .helpers import (ConfigError, EngineError, PreconditionError,
                      init_fraction, init_positive)
from .records import CHESS_THRESHOLDS, CheckKind, ViolationRecord, position_id

log = logging.getLogger(__name__)

EVALS_PER_FITNESS = 2
REPAIR_RETRIES = 32


@dataclass
class Individual:
    board: chess.Board
    fitness: float = None


@dataclass
class GaConfig:
    population_size: int = 1000
    max_generations: int = 20
    tournament_fraction: float = 0.10
    eval_budget: int = 50_000
    early_stop_patience: int = 5
    seed: int = 0
    elitism: bool = True
    # None reports above the first campaign threshold
    report_threshold: float = None
    # evaluate every reported board under all 8 symmetries, outside the budget
    full_symmetry_report: bool = True
    workers: int = 1

    def __post_init__(self):
        for name in ("population_size", "max_generations", "eval_budget", "early_stop_patience", "workers"):
            init_positive(name, getattr(self, name))
        self.tournament_fraction = init_fraction("tournament_fraction", self.tournament_fraction)
        if self.report_threshold is not None and not 0 <= self.report_threshold < 2:
            raise ConfigError(f"Invalid report_threshold: {self.report_threshold}. Must be in [0, 2)")
        if self.eval_budget < EVALS_PER_FITNESS:
            raise ConfigError(f"eval_budget {self.eval_budget} cannot pay for a single fitness call")


class Budget:
    """Counter of logical evaluations"""

    def __init__(self, total):
        self.total = total
        self.used = 0

    @property
    def remaining(self):
        return self.total - self.used

    def affordable(self, cost=EVALS_PER_FITNESS):
        return self.remaining // cost

    def charge(self, amount=EVALS_PER_FITNESS):
        if amount > self.remaining:
            raise PreconditionError(f"budget of {self.total} evaluations exhausted")
        self.used += amount


@dataclass
class GenerationStat:
    restart: int
    generation: int
    best: float
    mean: float
    budget_used: int


@dataclass
class GaStats:
    generations: list = field(default_factory=list)
    restarts: int = 0
    budget_used: int = 0
    evaluated: int = 0
    dead: int = 0
    truncated: bool = False

    def add(self, restart, generation, population, budget):
        scores = [ind.fitness for ind in population]
        self.generations.append(GenerationStat(restart, generation, max(scores),
                                               math.fsum(scores) / len(scores), budget.used))

    def best_by_restart(self):
        best = {}
        for stat in self.generations:
            best.setdefault(stat.restart, []).append(stat.best)
        return best

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["restart", "generation", "best", "mean", "budget_used"])
            for s in self.generations:
                writer.writerow([s.restart, s.generation, repr(s.best), repr(s.mean), s.budget_used])
        return path


def fitness(evaluator, board, budget=None):
    """|q(board) - q(board rotated by 180 degrees)|"""
    if not is_symmetric_candidate(board):
        raise PreconditionError(f"fitness needs a pawnless board without castling rights: {to_fen(board)}")
    if budget is not None:
        budget.charge(EVALS_PER_FITNESS)
    rotated = apply_symmetry(board, Symmetry.ROT180)
    return abs(evaluator.evaluate(board).q - evaluator.evaluate(rotated).q)


def tournament_select(population, fraction, rng):
    size = max(1, math.ceil(fraction * len(population)))
    entrants = rng.sample(range(len(population)), min(size, len(population)))
    winner = max(entrants, key=lambda i: (population[i].fitness, -i))
    return population[winner]


def _pair_kinds(board):
    return [k for k in NON_KING_KINDS if board.pieces(k, chess.WHITE) and board.pieces(k, chess.BLACK)]


def _transplant(board, removed, incoming, kind, rng):
    child = board.copy(stack=False)
    for square in removed:
        child.remove_piece_at(square)
    for color, target in zip((chess.WHITE, chess.BLACK), incoming):
        if child.piece_at(target) is not None:
            target = rng.choice([s for s in chess.SQUARES if child.piece_at(s) is None])
        child.set_piece_at(target, chess.Piece(kind, color))
    return child


def crossover(a, b, rng, retries=REPAIR_RETRIES):
    """
    Swap a white-and-black pair of one piece kind between two boards. Each
    piece lands on its partner's square when that is empty, else on a random
    empty square. Parents come back unchanged when no kind is shared or no
    legal pair of offspring turns up.
    """
    shared = [k for k in _pair_kinds(a) if k in _pair_kinds(b)]
    if not shared:
        return a.copy(stack=False), b.copy(stack=False)
    for _ in range(retries):
        kind = rng.choice(shared)
        pair_a = (rng.choice(list(a.pieces(kind, chess.WHITE))), rng.choice(list(a.pieces(kind, chess.BLACK))))
        pair_b = (rng.choice(list(b.pieces(kind, chess.WHITE))), rng.choice(list(b.pieces(kind, chess.BLACK))))
        child_a = _transplant(a, pair_a, pair_b, kind, rng)
        child_b = _transplant(b, pair_b, pair_a, kind, rng)
        if child_a.is_valid() and child_b.is_valid():
            return child_a, child_b
    return a.copy(stack=False), b.copy(stack=False)


class MutationRule(enum.Enum):
    FLIP = 1
    MOVE_ANYWHERE = 2
    MOVE_ADJACENT = 3
    QUIET_MOVE = 4
    SWITCH_SIDE = 5
    ROTATE = 6
    SUBSTITUTE = 7


def _random_piece_square(board, rng):
    return rng.choice(list(chess.SquareSet(board.occupied)))


def _move_anywhere(board, rng):
    source = _random_piece_square(board, rng)
    target = rng.choice(list(chess.SquareSet(~board.occupied & chess.BB_ALL)))
    child = board.copy(stack=False)
    child.set_piece_at(target, child.remove_piece_at(source))
    return child


def _move_adjacent(board, rng):
    source = _random_piece_square(board, rng)
    targets = list(chess.SquareSet(chess.BB_KING_ATTACKS[source] & ~board.occupied))
    if not targets:
        return None
    child = board.copy(stack=False)
    child.set_piece_at(rng.choice(targets), child.remove_piece_at(source))
    return child


def _quiet_move(board, rng):
    moves = [m for m in board.legal_moves if not board.is_capture(m)]
    if not moves:
        return None
    child = board.copy(stack=False)
    child.push(rng.choice(moves))
    return child.copy(stack=False)


def _switch_side(board, rng):
    child = board.copy(stack=False)
    child.turn = not child.turn
    return child


def _substitute(board, rng):
    kinds = _pair_kinds(board)
    if not kinds:
        return None
    old = rng.choice(kinds)
    new = rng.choice([k for k in NON_KING_KINDS if k != old])
    child = board.copy(stack=False)
    for color in (chess.WHITE, chess.BLACK):
        square = rng.choice(list(board.pieces(old, color)))
        child.set_piece_at(square, chess.Piece(new, color))
    return child


_RULES = {
    MutationRule.FLIP: lambda board, rng: apply_symmetry(board, rng.choice(FLIPS)),
    MutationRule.MOVE_ANYWHERE: _move_anywhere,
    MutationRule.MOVE_ADJACENT: _move_adjacent,
    MutationRule.QUIET_MOVE: _quiet_move,
    MutationRule.SWITCH_SIDE: _switch_side,
    MutationRule.ROTATE: lambda board, rng: apply_symmetry(board, rng.choice(ROTATIONS)),
    MutationRule.SUBSTITUTE: _substitute,
}


def mutate_with_rule(board, rng, retries=REPAIR_RETRIES):
    """Apply one uniformly drawn rule; returns ``(board, rule)``"""
    rule = rng.choice(list(MutationRule))
    for _ in range(retries):
        child = _RULES[rule](board, rng)
        if child is not None and child.is_valid():
            child.ep_square = None
            return child, rule
    return board.copy(stack=False), rule


def mutate(board, rng, retries=REPAIR_RETRIES):
    return mutate_with_rule(board, rng, retries)[0]


class GeneticSearch:
    """
    One budgeted search. Selection and variation run in a fixed order on a
    single thread, so a seed reproduces the run; fitness calls of a
    generation may be spread over ``config.workers`` threads.
    """

    def __init__(self, config, evaluator, rng=None):
        self.config = config
        self.evaluator = evaluator
        self.rng = rng or random.Random(config.seed)
        self.budget = Budget(config.eval_budget)
        self.stats = GaStats()
        self.records = []
        self.input_map = {}
        self.case_prefix = "ga"
        self.report_threshold = CHESS_THRESHOLDS[0] if config.report_threshold is None else config.report_threshold

    def _safe_fitness(self, board):
        try:
            return fitness(self.evaluator, board)
        except EngineError as e:
            return e

    def _score(self, boards):
        if self.config.workers > 1 and len(boards) > 1:
            with concurrent.futures.ThreadPoolExecutor(self.config.workers) as executor:
                return list(executor.map(self._safe_fitness, boards))
        return [self._safe_fitness(b) for b in boards]

    def _evaluate(self, population, restart, generation):
        """Score individuals without fitness; drops those the budget cannot pay for"""
        pending = [i for i, ind in enumerate(population) if ind.fitness is None]
        affordable = self.budget.affordable()
        if len(pending) > affordable:
            log.info("budget exhausted in restart %d generation %d: %d of %d individuals evaluated",
                     restart, generation, affordable, len(pending))
            self.stats.truncated = True
            dropped = set(pending[affordable:])
            population = [ind for i, ind in enumerate(population) if i not in dropped]
            pending = [i for i, ind in enumerate(population) if ind.fitness is None]

        results = iter(self._score([population[i].board for i in pending]))
        # budget already spent on the batch; a resample may only use what is
        # left after the individuals still waiting to be charged
        waiting = len(pending)
        alive = []
        for index, ind in enumerate(population):
            if ind.fitness is None:
                result = next(results)
                self.budget.charge()
                waiting -= 1
                while isinstance(result, EngineError):
                    self.stats.dead += 1
                    if self.budget.affordable() <= waiting:
                        log.warning("evaluation failed for %s, no budget to resample: %s", to_fen(ind.board), result)
                        self.stats.truncated = True
                        break
                    log.warning("evaluation failed for %s, resampling: %s", to_fen(ind.board), result)
                    ind.board = random_pawnless(self.rng)
                    self.budget.charge()
                    result = self._safe_fitness(ind.board)
                if isinstance(result, EngineError):
                    continue
                ind.fitness = result
                self.stats.evaluated += 1
                self._report(ind, f"{self.case_prefix}-{restart}-{generation}-{index}")
            alive.append(ind)
        self.stats.budget_used = self.budget.used
        return alive

    def _report(self, ind, case_id):
        if ind.fitness <= self.report_threshold:
            return
        rotated = apply_symmetry(ind.board, Symmetry.ROT180)
        detail = {"fitness_rot180": ind.fitness}
        if self.config.full_symmetry_report:
            try:
                qs = [self.evaluator.evaluate(v).q for v in all_symmetries(ind.board)]
                detail["max_over_symmetries"] = max(qs) - min(qs)
            except EngineError as e:
                log.warning("full symmetry report failed for %s: %s", case_id, e)
        fens = (to_fen(ind.board), to_fen(rotated))
        for fen in fens:
            self.input_map[position_id(fen)] = fen
        self.records.append(ViolationRecord(check=CheckKind.BOARD_TRANSFORMATIONS, case_id=case_id,
                                            inputs=tuple(position_id(f) for f in fens),
                                            value=ind.fitness, detail=json.dumps(detail)))

    def _offspring(self, population):
        cfg, rng = self.config, self.rng
        children = []
        if cfg.elitism:
            elite = max(population, key=lambda ind: ind.fitness)
            children.append(Individual(elite.board.copy(stack=False), elite.fitness))
        while len(children) < cfg.population_size:
            first = tournament_select(population, cfg.tournament_fraction, rng)
            second = tournament_select(population, cfg.tournament_fraction, rng)
            for child in crossover(first.board, second.board, rng):
                children.append(Individual(mutate(child, rng)))
        return children[:cfg.population_size]

    def run(self):
        cfg = self.config
        restart = 0
        while self.budget.affordable() >= 1:
            population = [Individual(random_pawnless(self.rng)) for _ in range(cfg.population_size)]
            population = self._evaluate(population, restart, 0)
            if not population:
                break
            self.stats.add(restart, 0, population, self.budget)
            best = max(ind.fitness for ind in population)
            stale = 0
            for generation in range(1, cfg.max_generations):
                if stale >= cfg.early_stop_patience or self.budget.affordable() < 1:
                    break
                population = self._evaluate(self._offspring(population), restart, generation)
                if not population:
                    break
                self.stats.add(restart, generation, population, self.budget)
                generation_best = max(ind.fitness for ind in population)
                if generation_best > best:
                    best, stale = generation_best, 0
                else:
                    stale += 1
            log.debug("restart %d finished with best fitness %.4f", restart, best)
            restart += 1
        self.stats.restarts = restart
        log.info("genetic search: %d evaluations, %d restarts, %d reported boards",
                 self.budget.used, restart, len(self.records))
        return self.records, self.stats


def evolve(config, evaluator, rng=None):
    search = GeneticSearch(config, evaluator, rng)
    return search.run()


def random_search(budget, evaluator, rng, report_threshold=None):
    """
    Baseline with the same accounting as evolve: fresh random boards until the
    budget is spent. Returns ``(records, stats)``.
    """
    config = GaConfig(population_size=1, eval_budget=budget, report_threshold=report_threshold,
                      full_symmetry_report=False)
    search = GeneticSearch(config, evaluator, rng)
    search.case_prefix = "random"
    index = 0
    while search.budget.affordable() >= 1:
        search._evaluate([Individual(random_pawnless(search.rng))], 0, index)
        index += 1
    log.info("random search: %d evaluations, %d reported boards", search.budget.used, len(search.records))
    return search.records, search.stats
