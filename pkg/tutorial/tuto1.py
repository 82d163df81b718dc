import random

from consist.board import random_pawnless
from consist.checks import check_transformations
from consist.mocks import MaterialEvaluator, PlantedBugEvaluator

evaluator = PlantedBugEvaluator(MaterialEvaluator(), delta=0.3, predicate="white-king-queenside")
board = random_pawnless(random.Random(1))
case = check_transformations(evaluator, board)
print("violation: %.3f" % case.violation)
for label, fen, evaluation in zip(case.labels, case.fens, case.evaluations):
    print("%-18s %-40s q=%+.3f" % (label, fen, evaluation.q))
