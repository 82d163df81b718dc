import os
import tempfile

from consist.forecast import OracleConfig, QuestionTuple, run_tuple
from consist.oracles import ScriptedOracle

QUESTIONS = ["Will a crewed mission land on Mars before 2040?",
             "Will no crewed mission land on Mars before 2040?"]

oracle = ScriptedOracle({QUESTIONS[0]: [0.35, 0.30, 0.40], QUESTIONS[1]: [0.80, 0.75, 0.80]})
config = OracleConfig(kind="fixed")
tup = QuestionTuple(id="neg-mars", kind="negation", questions=QUESTIONS)
record = run_tuple(config, tup, oracle)
# medians 0.35 and 0.8: the two answers overshoot by 0.15
print(record.check.value, "%.2f" % record.value)
print(record.detail)

# the same through a campaign, with the script in a file
script = os.path.join(tempfile.mkdtemp(), "answers.yaml")
with open(script, "w", encoding="utf-8") as fh:
    for question in tup.questions:
        fh.write('"%s": 0.5\n' % question)
print("pyconsist forecast-run --oracle scripted --script %s --tuples <your tuples.yaml>" % script)
