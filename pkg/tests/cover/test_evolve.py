# -*- coding: utf-8 -*-

"Adversarial board search: operators, budget accounting and the random baseline"

#pyconsist-cover-test:slow=yes

import common  # test utilities

import collections
import json
import os

import chess

from consist.board import (Symmetry, apply_symmetry, is_symmetric_candidate,
                           parse_fen, piece_multiset, random_pawnless)
from consist.evolve import (Budget, GaConfig, GeneticSearch, Individual,
                            MutationRule, crossover, evolve, fitness,
                            mutate_with_rule, random_search,
                            tournament_select)
from consist.helpers import (ConfigError, EngineTransportError,
                             PreconditionError)
from consist.mocks import MaterialEvaluator, PlantedBugEvaluator
from consist.uci import Evaluator

THRESHOLD = 0.25


def rare_bug():
    return PlantedBugEvaluator(MaterialEvaluator(), 0.3, "white-king-a1")


def discoveries(records):
    return len({r.inputs[0] for r in records if r.value > THRESHOLD})


class FlakyEvaluator(Evaluator):
    """Fails on every board whose white king stands on the first rank"""
    identity = "flaky"

    def __init__(self):
        self.inner = MaterialEvaluator()

    def evaluate(self, board, node_limit=None):
        if chess.square_rank(board.king(chess.WHITE)) == 0:
            raise EngineTransportError("engine died")
        return self.inner.evaluate(board)


@common.add_unittest
def dotest_fitness(workdir):
    rng = common.rng(20)
    evaluator = PlantedBugEvaluator(MaterialEvaluator(), 0.3, "white-king-queenside")
    for _ in range(300):
        board = random_pawnless(rng)
        value = fitness(evaluator, board)
        assert value == fitness(evaluator, apply_symmetry(board, Symmetry.ROT180))
        # rotation by 180 degrees always moves the king across the board's middle file
        assert abs(value - 0.3) < 1e-12
        assert fitness(MaterialEvaluator(), board) == 0.0
    budget = Budget(5)
    fitness(evaluator, board, budget)
    fitness(evaluator, board, budget)
    assert budget.used == 4 and budget.affordable() == 0
    try:
        fitness(evaluator, board, budget)
    except PreconditionError:
        pass
    else:
        raise AssertionError("overdrawn budget")
    try:
        fitness(evaluator, parse_fen("4k3/4p3/8/8/8/8/8/4K3 w - - 0 1"))
    except PreconditionError:
        pass
    else:
        raise AssertionError("board with pawns accepted")


@common.add_unittest
def dotest_tournament(workdir):
    population = [Individual(None, f) for f in (0.1, 0.5, 0.5, 0.2, 0.0)]
    rng = common.rng(21)
    # a full tournament returns the best, the lower index on ties
    assert tournament_select(population, 1.0, rng) is population[1]
    single = [Individual(None, 0.0)]
    assert tournament_select(single, 0.1, rng) is single[0]

    population = [Individual(None, i / 100) for i in range(100)]
    wins = collections.Counter(id(tournament_select(population, 0.1, rng)) for _ in range(20000))
    best = id(population[-1])
    assert wins[best] == max(wins.values())
    assert wins[best] > 1600


@common.add_unittest
def dotest_crossover_and_mutation(workdir):
    rng = common.rng(22)
    counts = collections.Counter()
    for _ in range(300):
        a, b = random_pawnless(rng), random_pawnless(rng)
        child_a, child_b = crossover(a, b, rng)
        for child in (child_a, child_b):
            assert child.is_valid() and is_symmetric_candidate(child)
            assert sum(piece_multiset(child, chess.WHITE).values()) == 4
            # the kinds carried by each color stay matched
            assert piece_multiset(child, chess.WHITE) == piece_multiset(child, chess.BLACK)
        child, rule = mutate_with_rule(a, rng)
        counts[rule] += 1
        assert child.is_valid() and is_symmetric_candidate(child)
        assert child.ep_square is None
        assert piece_multiset(child, chess.WHITE) == piece_multiset(child, chess.BLACK)
    assert set(counts) == set(MutationRule)


@common.add_unittest
def dotest_mutation_rule_distribution(workdir):
    rng = common.rng(23)
    board = random_pawnless(rng)
    counts = collections.Counter(mutate_with_rule(board, rng)[1] for _ in range(7000))
    assert set(counts) == set(MutationRule)
    # uniform over seven rules: 1000 expected, standard deviation about 29
    for rule in MutationRule:
        assert 850 <= counts[rule] <= 1150, (rule, counts[rule])


@common.add_unittest
def dotest_config(workdir):
    for bad in ({"tournament_fraction": 0}, {"tournament_fraction": 1.5}, {"population_size": 0},
                {"eval_budget": 1}, {"early_stop_patience": 0}):
        try:
            GaConfig(**bad)
        except ConfigError:
            pass
        else:
            raise AssertionError("accepted %r" % bad)
    config = GaConfig()
    assert (config.population_size, config.max_generations, config.eval_budget) == (1000, 20, 50000)
    assert config.tournament_fraction == 0.1 and config.early_stop_patience == 5


@common.add_unittest
def dotest_budget_and_reproducibility(workdir):
    config = GaConfig(population_size=30, max_generations=4, eval_budget=501, seed=5,
                      full_symmetry_report=False)
    records, stats = evolve(config, rare_bug())
    assert stats.budget_used <= 501 and stats.budget_used == 500
    assert stats.evaluated == 250
    assert stats.truncated
    assert stats.restarts >= 2
    again, _ = evolve(config, rare_bug())
    assert [(r.case_id, r.inputs, r.value) for r in again] == [(r.case_id, r.inputs, r.value) for r in records]
    for record in records:
        assert record.check.value == "board_transformations"
        assert record.case_id.startswith("ga-")
    path = stats.write_csv(os.path.join(workdir, "ga_stats.csv"))
    with open(path, encoding="utf-8") as fh:
        assert fh.readline().strip() == "restart,generation,best,mean,budget_used"
    # fitness in the statistics never decreases within a restart when the elite is kept
    for history in stats.best_by_restart().values():
        assert history == sorted(history)


@common.add_unittest
def dotest_full_symmetry_report(workdir):
    config = GaConfig(population_size=20, max_generations=2, eval_budget=200, seed=1)
    search = GeneticSearch(config, PlantedBugEvaluator(MaterialEvaluator(), 0.3, "white-king-queenside"))
    records, stats = search.run()
    assert len(records) == stats.evaluated
    detail = json.loads(records[0].detail)
    assert abs(detail["max_over_symmetries"] - 0.3) < 1e-12
    for record in records:
        assert set(record.inputs) <= set(search.input_map)


@common.add_unittest
def dotest_dead_individuals(workdir):
    config = GaConfig(population_size=20, max_generations=3, eval_budget=300, seed=2,
                      full_symmetry_report=False)
    search = GeneticSearch(config, FlakyEvaluator())
    records, stats = search.run()
    assert stats.dead > 0
    assert stats.budget_used <= 300
    assert records == []
    assert stats.evaluated + stats.dead <= 150


@common.add_unittest
def dotest_dead_individuals_near_budget_end(workdir):
    # failures late in a generation must never overdraw the budget reserved
    # for the rest of the batch
    truncated = dead = 0
    for budget in (41, 61, 101, 157):
        for seed in range(40):
            config = GaConfig(population_size=20, max_generations=3, eval_budget=budget, seed=seed,
                              full_symmetry_report=False)
            records, stats = GeneticSearch(config, FlakyEvaluator()).run()
            assert stats.budget_used <= budget, (seed, budget, stats.budget_used)
            assert records == []
            truncated += stats.truncated
            dead += stats.dead
    assert dead > 0 and truncated > 0


@common.add_unittest
def dotest_ga_beats_random(workdir):
    wins = []
    for seed in range(5):
        config = GaConfig(population_size=100, max_generations=20, eval_budget=5000, seed=seed,
                          report_threshold=THRESHOLD, full_symmetry_report=False)
        ga_records, ga_stats = evolve(config, rare_bug())
        random_records, random_stats = random_search(5000, rare_bug(), common.rng(1000 + seed), THRESHOLD)
        assert ga_stats.budget_used <= 5000 and random_stats.budget_used == 5000
        assert all(r.case_id.startswith("random-") for r in random_records)
        wins.append(discoveries(ga_records) > discoveries(random_records))
    assert sum(wins) >= 4, wins


if __name__ == "__main__":
    common.testmain(__file__)
