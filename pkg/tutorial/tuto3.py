import random

from consist.evolve import GaConfig, evolve, random_search
from consist.mocks import MaterialEvaluator, PlantedBugEvaluator

THRESHOLD = 0.25


def found(records):
    return len({r.inputs[0] for r in records if r.value > THRESHOLD})


evaluator = PlantedBugEvaluator(MaterialEvaluator(), delta=0.3, predicate="white-king-a1")
for seed in range(3):
    config = GaConfig(population_size=100, eval_budget=5000, seed=seed, report_threshold=THRESHOLD,
                      full_symmetry_report=False)
    records, stats = evolve(config, evaluator)
    baseline, _ = random_search(5000, evaluator, random.Random(1000 + seed), THRESHOLD)
    print("seed %d: adversarial %d boards, random %d boards (%d restarts)"
          % (seed, found(records), found(baseline), stats.restarts))
