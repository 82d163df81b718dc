# -*- coding: utf-8 -*-

"Forecast answers, aggregation, consistency metrics and question tuples"

import common  # test utilities

import itertools
import json
import math
import os
import warnings

from consist.forecast import (Direction, OracleConfig, QuestionTuple,
                              TupleKind, Unit, aggregate_median,
                              load_tuples, metric_bayes,
                              metric_monotonicity, metric_negation,
                              metric_paraphrase, parse_answer, parse_tuples,
                              query_oracle, run_tuple, spearman)
from consist.helpers import AggregationError, ConfigError, ContractError
from consist.oracles import ScriptedOracle
from consist.records import CheckKind
from consist.settings import SAMPLE_TUPLES

P, N = Unit.PROBABILITY, Unit.QUANTITY

PARSE_CASES = [
    ("Reasoning first.\n[Answer] 0.3", P, 0.3),
    ("[Answer] 0.75", P, 0.75),
    ("[Answer]0.4", P, 0.4),
    ("[Answer] .5", P, 0.5),
    ("[Answer] 1", P, 1.0),
    ("[Answer] 0", P, 0.0),
    ("[Answer] 1.2", P, None),
    ("[Answer] -0.1", P, None),
    ("[Answer] 30%", P, None),
    ("No token, just 0.4", P, None),
    ("", P, None),
    (None, P, None),
    ("[Answer] unsure", P, None),
    ("[Answer] 0.2\nOn reflection the base rate is higher.\n[Answer] 0.35", P, 0.35),
    ("[Answer] 0.2\nthat is my final estimate", P, 0.2),
    ("[Answer] 0.6 or maybe 0.7", P, 0.6),
    ("[Answer] 0.3 [Answer] 0.4", P, 0.4),
    ("[Answer] about 0.45", P, 0.45),
    ("[Answer] 1e-1", P, 0.1),
    ("[answer] 0.5", P, None),
    ("[Answer] 0.5.", P, 0.5),
    ("  [Answer]   0.9   \n\n", P, 0.9),
    ("[Answer] nan", P, None),
    ("[Answer] 0.25\n[Answer]", P, None),
    ("[Answer] 1,234", N, 1234.0),
    ("[Answer] 20", N, 20.0),
    ("[Answer] -3.5", N, -3.5),
    ("[Answer] 2.5e3", N, 2500.0),
    ("[Answer] 40 %", N, None),
    ("Somewhere around twenty", N, None),
    ("[Answer] 0,5", P, None),
    ("[Answer] 12,5", N, None),
    ("[Answer] 1,2345", N, None),
    ("[Answer] 1,000, maybe more", N, 1000.0),
]


def oracle_rank(values):
    # average ranks, starting at 1
    order = sorted(values)
    return [sum(i + 1 for i, o in enumerate(order) if o == v) / order.count(v) for v in values]


def oracle_spearman(xs, ys):
    rx, ry = oracle_rank(xs), oracle_rank(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return 1.0
    return sxy / math.sqrt(sxx * syy)


@common.add_unittest
def dotest_parse_fixture(workdir):
    assert len(PARSE_CASES) == 34
    for text, unit, expected in PARSE_CASES:
        value = parse_answer(text, unit)
        if expected is None:
            assert value is None, (text, value)
        else:
            assert value is not None and abs(value - expected) < 1e-12, (text, value)


@common.add_unittest
def dotest_discard_then_median(workdir):
    # every question keeps only its parseable answers before taking the median
    texts = [t for t, unit, _ in PARSE_CASES[:13] if unit is P]
    samples = [parse_answer(t) for t in texts]
    assert samples.count(None) == 7
    assert abs(aggregate_median(samples) - 0.45) < 1e-12
    assert abs(aggregate_median([0.1, None, 0.9]) - 0.5) < 1e-12
    assert aggregate_median([0.2]) == 0.2
    for hopeless in ([], [None, None]):
        try:
            aggregate_median(hopeless)
        except AggregationError:
            pass
        else:
            raise AssertionError("aggregated %r" % hopeless)


@common.add_unittest
def dotest_metrics(workdir):
    assert abs(metric_negation(0.7, 0.4) - 0.1) < 1e-12
    assert metric_negation(0.25, 0.75) == 0.0
    assert abs(metric_paraphrase([0.2, 0.5, 0.3]) - 0.3) < 1e-12
    assert metric_paraphrase([0.4]) == 0.0
    assert abs(metric_bayes(0.5, 0.5, 0.8, 0.4) - math.sqrt(0.2)) < 1e-12
    assert metric_bayes(0.5, 0.2, 0.5, 0.2) == 0.0
    keys = [2025, 2030, 2035, 2040]
    assert metric_monotonicity([1, 2, 3, 4], Direction.INCREASING, keys) == 0.0
    assert metric_monotonicity([4, 3, 2, 1], "increasing", keys) == 1.0
    assert metric_monotonicity([4, 3, 2, 1], Direction.DECREASING, keys) == 0.0
    assert metric_monotonicity([5, 5, 5, 5], Direction.INCREASING, keys) == 0.0
    assert abs(metric_monotonicity([1, 3, 2, 4], Direction.INCREASING, keys) - 0.1) < 1e-12
    for bad in (lambda: metric_negation(1.2, 0.1), lambda: metric_bayes(0.5, 0.5, -0.1, 0.3),
                lambda: metric_monotonicity([1, 2], Direction.INCREASING, [1, 2]),
                lambda: metric_monotonicity([1, float("inf"), 2], Direction.INCREASING, [1, 2, 3]),
                lambda: spearman([1], [1])):
        try:
            bad()
        except ContractError:
            pass
        else:
            raise AssertionError("contract not enforced")


@common.add_unittest
def dotest_spearman_oracle(workdir):
    patterns = {n: [list(range(n)), list(range(n, 0, -1)), [0] * (n - 1) + [1], [1, 0] * (n // 2) + [2] * (n % 2)]
                for n in range(2, 6)}
    checked = 0
    for n in range(2, 6):
        for xs in itertools.product((0, 1, 2), repeat=n):
            for ys in patterns[n]:
                assert abs(spearman(list(xs), ys) - oracle_spearman(list(xs), ys)) < 1e-12, (xs, ys)
                checked += 1
    assert checked == 4 * (9 + 27 + 81 + 243)
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0


@common.add_unittest
def dotest_metric_fuzz(workdir):
    rng = common.rng(30)
    for _ in range(25000):
        p = [rng.random() for _ in range(4)]
        assert 0.0 <= metric_negation(p[0], p[1]) <= 1.0
        assert 0.0 <= metric_paraphrase(p[:rng.randrange(1, 5)]) <= 1.0
        assert 0.0 <= metric_bayes(*p) <= 1.0
        n = rng.randrange(3, 7)
        values = [rng.choice((rng.uniform(-1e6, 1e6), float(rng.randrange(3)))) for _ in range(n)]
        keys = sorted(rng.sample(range(2020, 2100), n))
        direction = rng.choice(list(Direction))
        assert 0.0 <= metric_monotonicity(values, direction, keys) <= 1.0


@common.add_unittest
def dotest_tuple_validation(workdir):
    bad = [
        dict(id="a", kind="negation", questions=["x", "y", "z"]),
        dict(id="b", kind="bayes", questions=["w", "x", "y"]),
        dict(id="c", kind="paraphrase", questions=["x"]),
        dict(id="d", kind="monotonicity", questions=["x", "y", "z"], keys=[1, 2, 3]),
        dict(id="e", kind="monotonicity", questions=["x", "y", "z"], direction="increasing", keys=[1, 3, 2]),
        dict(id="f", kind="self_consistency", questions=["x", "y"]),
    ]
    for item in bad:
        try:
            QuestionTuple(**item)
        except ConfigError:
            pass
        else:
            raise AssertionError("accepted %r" % item)
    self_check = QuestionTuple(id="s", kind="self_consistency", questions=["Will it rain?"])
    assert self_check.questions == ["Will it rain?"] * 4
    assert self_check.question_ids() == ["s/0", "s/1", "s/2", "s/3"]
    assert self_check.kind.check is CheckKind.SELF_CONSISTENCY
    mono = QuestionTuple(id="m", kind="monotonicity", questions=["a", "b", "c"],
                         direction="decreasing", keys=["1", "2", "3"])
    assert mono.unit is Unit.QUANTITY and mono.keys == [1, 2, 3]


@common.add_unittest
def dotest_tuple_files(workdir):
    tuples = load_tuples(SAMPLE_TUPLES)
    assert len(tuples) == 20
    assert {t.kind for t in tuples} == set(TupleKind)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parsed = parse_tuples([{"id": "n", "kind": "negation", "questions": ["a", "b"], "note": "x"}])
    assert parsed[0].kind is TupleKind.NEGATION
    assert any("note" in str(w.message) for w in caught)
    for broken in ([{"id": "n", "kind": "negation", "questions": ["a", "b"]}] * 2,
                   [{"id": "n", "kind": "negation"}], {"no": "tuples"}, [["a", "b"]]):
        try:
            parse_tuples(broken)
        except ConfigError:
            pass
        else:
            raise AssertionError("accepted %r" % (broken,))
    path = os.path.join(workdir, "broken.yaml")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tuples: [unclosed\n")
    try:
        load_tuples(path)
    except ConfigError:
        pass
    else:
        raise AssertionError("broken YAML accepted")


@common.add_unittest
def dotest_oracle_config(workdir):
    assert OracleConfig().repeats == 3
    assert OracleConfig(temperature=0.7).repeats == 6
    assert OracleConfig(repeats=2).repeats == 2
    assert OracleConfig().prompt_for(Unit.QUANTITY).name == "quantity"
    assert OracleConfig(system_prompt="negation-aware").prompt_for(Unit.PROBABILITY).name == "negation-aware"
    for bad in ({"temperature": -1}, {"repeats": 0}, {"system_prompt": "poetry"}, {"kind": "magic"},
                {"kind": "scripted"}):
        try:
            OracleConfig(**bad)
        except ConfigError:
            pass
        else:
            raise AssertionError("accepted %r" % bad)


@common.add_unittest
def dotest_run_tuple(workdir):
    config = OracleConfig(kind="fixed")
    oracle = ScriptedOracle({
        "Will it rain?": [0.7, "I cannot say.", 0.6],
        "Will it stay dry?": [0.5],
        "Rainy days in 2030?": [10], "Rainy days in 2031?": [12], "Rainy days in 2032?": [11],
    })
    archived = []
    negation = QuestionTuple(id="n1", kind="negation", questions=["Will it rain?", "Will it stay dry?"])
    record = run_tuple(config, negation, oracle, archived.append)
    # medians 0.65 and 0.5
    assert record.check is CheckKind.NEGATION
    assert abs(record.value - 0.15) < 1e-12
    assert record.inputs == ("n1/0", "n1/1")
    detail = json.loads(record.detail)
    assert detail["samples"][0] == [0.7, None, 0.6]
    assert len(archived) == 6 and archived[1]["parsed"] is None

    mono = QuestionTuple(id="m1", kind="monotonicity", direction="increasing", keys=[2030, 2031, 2032],
                         questions=["Rainy days in 2030?", "Rainy days in 2031?", "Rainy days in 2032?"])
    record = run_tuple(config, mono, oracle)
    assert abs(record.value - 0.25) < 1e-12

    forecast = query_oracle(config, "Will it rain?", oracle, question_id="q")
    assert abs(forecast.value - 0.65) < 1e-12 and forecast.samples == [0.7, None, 0.6]
    unknown = QuestionTuple(id="u", kind="paraphrase", questions=["Will it rain?", "Who knows?"])
    try:
        run_tuple(config, unknown, oracle)
    except AggregationError as e:
        assert "u/1" in str(e)
    else:
        raise AssertionError("tuple without answers scored")


if __name__ == "__main__":
    common.testmain(__file__)
