"""
Forecast consistency checks.

Question tuples are put to an oracle, every question several times; the
median of the parseable answers is the forecast, and a metric in [0, 1] says
how far the forecasts of one tuple are from being logically consistent.
"""

import enum
import json
import logging
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.stats import rankdata

from .helpers import AggregationError, ConfigError, ContractError, OracleError
from .prompts import ANSWER_TOKEN, get_prompt
from .records import CheckKind, ViolationRecord

log = logging.getLogger(__name__)


class TupleKind(enum.Enum):
    NEGATION = "negation"
    PARAPHRASE = "paraphrase"
    MONOTONICITY = "monotonicity"
    BAYES = "bayes"
    SELF_CONSISTENCY = "self_consistency"

    @property
    def check(self):
        return _CHECK_OF_KIND[self]


_CHECK_OF_KIND = {
    TupleKind.NEGATION: CheckKind.NEGATION,
    TupleKind.PARAPHRASE: CheckKind.PARAPHRASE,
    TupleKind.MONOTONICITY: CheckKind.MONOTONICITY,
    TupleKind.BAYES: CheckKind.BAYES_RULE,
    TupleKind.SELF_CONSISTENCY: CheckKind.SELF_CONSISTENCY,
}


class Direction(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


class Unit(enum.Enum):
    PROBABILITY = "probability"
    QUANTITY = "quantity"


SELF_CONSISTENCY_REPEATS = 4


@dataclass
class QuestionTuple:
    id: str
    kind: TupleKind
    questions: list
    direction: Direction = None
    keys: list = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = TupleKind(self.kind)
        if isinstance(self.direction, str):
            self.direction = Direction(self.direction)
        self.questions = [str(q) for q in self.questions]
        n = len(self.questions)
        kind = self.kind
        if kind is TupleKind.NEGATION and n != 2:
            raise ConfigError(f"{self.id}: a negation tuple has 2 questions, got {n}")
        if kind is TupleKind.BAYES and n != 4:
            raise ConfigError(f"{self.id}: a Bayes tuple has 4 questions (A, B, A|B, B|A), got {n}")
        if kind is TupleKind.PARAPHRASE and n < 2:
            raise ConfigError(f"{self.id}: a paraphrase tuple needs at least 2 questions")
        if kind is TupleKind.SELF_CONSISTENCY:
            if n < 1 or len(set(self.questions)) != 1:
                raise ConfigError(f"{self.id}: a self-consistency tuple repeats one question")
            if n == 1:
                self.questions = self.questions * SELF_CONSISTENCY_REPEATS
        if kind is TupleKind.MONOTONICITY:
            if n < 3:
                raise ConfigError(f"{self.id}: a monotonicity tuple needs at least 3 questions")
            if self.direction is None:
                raise ConfigError(f"{self.id}: a monotonicity tuple needs a direction")
            if self.keys is None or len(self.keys) != n:
                raise ConfigError(f"{self.id}: monotonicity keys must match the {n} questions")
            self.keys = [int(k) for k in self.keys]
            if any(b <= a for a, b in zip(self.keys, self.keys[1:])):
                raise ConfigError(f"{self.id}: monotonicity keys must be strictly ascending")

    @property
    def unit(self):
        return Unit.QUANTITY if self.kind is TupleKind.MONOTONICITY else Unit.PROBABILITY

    def question_ids(self):
        return [f"{self.id}/{i}" for i in range(len(self.questions))]


@dataclass
class Forecast:
    question_id: str
    samples: list
    value: float
    unit: Unit = Unit.PROBABILITY
    responses: list = field(default_factory=list)


@dataclass
class OracleConfig:
    model_name: str = "gpt-4"
    endpoint: str = None
    temperature: float = 0.0
    repeats: int = None
    # a prompt name, or None to choose by unit
    system_prompt: str = None
    timeout: float = 60.0
    max_retries: int = 5
    max_time: float = 300.0
    requests_per_minute: float = None
    api_key_env: str = "OPENAI_API_KEY"
    max_tokens: int = 1024
    # "chat" for a live endpoint; "scripted" and "fixed" answer locally
    kind: str = "chat"
    script: str = None
    fixed_response: str = "[Answer] 0.5"

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"Invalid temperature: {self.temperature}. Must be >= 0")
        if self.repeats is None:
            self.repeats = 3 if self.temperature == 0 else 6
        if self.repeats < 1:
            raise ConfigError(f"Invalid repeats: {self.repeats}. Must be >= 1")
        if self.system_prompt is not None:
            get_prompt(self.system_prompt)
        if self.kind not in ("chat", "scripted", "fixed"):
            raise ConfigError(f"Unknown oracle kind {self.kind!r}")
        if self.kind == "scripted" and not self.script:
            raise ConfigError("A scripted oracle needs a script file")

    def prompt_for(self, unit):
        if self.system_prompt:
            return get_prompt(self.system_prompt)
        return get_prompt("quantity" if unit is Unit.QUANTITY else "probability")


_NUMBER = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?(?:[eE][-+]?\d+)?|[-+]?\.\d+(?:[eE][-+]?\d+)?")
_COMMA_TAIL = re.compile(r",?\d")


def parse_answer(response_text, unit=Unit.PROBABILITY):
    """
    The first number after the last ``[Answer]`` token, searching from the
    last line upward. Returns None when there is no token, no number, a
    percentage, or a probability outside [0, 1].
    """
    if not response_text:
        return None
    for line in reversed(response_text.strip().splitlines()):
        position = line.rfind(ANSWER_TOKEN)
        if position < 0:
            continue
        tail = line[position + len(ANSWER_TOKEN):]
        match = _NUMBER.search(tail)
        if not match:
            return None
        # a decimal comma ("0,5") or a malformed thousands group ("1,2345")
        if _COMMA_TAIL.match(tail, match.end()):
            return None
        if tail[match.end():].lstrip().startswith("%"):
            return None
        value = float(match.group().replace(",", ""))
        if not math.isfinite(value):
            return None
        if unit is Unit.PROBABILITY and not 0.0 <= value <= 1.0:
            return None
        return value
    return None


def aggregate_median(samples):
    present = [s for s in samples if s is not None]
    if not present:
        raise AggregationError(f"no usable answer among {len(samples)} samples")
    return float(np.median(present))


def _probability(name, value):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ContractError(f"{name} must be a probability, got {value}")
    return value


def metric_negation(p_a, p_not_a):
    return abs(_probability("p(A)", p_a) + _probability("p(not A)", p_not_a) - 1)


def metric_paraphrase(values):
    values = [_probability("paraphrase forecast", v) for v in values]
    if not values:
        raise ContractError("paraphrase metric needs at least one value")
    return max(values) - min(values)


def spearman(xs, ys):
    """
    Rank correlation with average ranks for ties. A constant sequence counts as
    perfectly ordered (rho = 1).
    """
    if len(xs) != len(ys) or len(xs) < 2:
        raise ContractError(f"spearman needs two sequences of equal length >= 2, got {len(xs)} and {len(ys)}")
    rx = rankdata(np.asarray(xs, dtype=float))
    ry = rankdata(np.asarray(ys, dtype=float))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denominator = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denominator == 0:
        return 1.0
    return max(-1.0, min(1.0, float(np.dot(dx, dy)) / denominator))


def metric_monotonicity(values, direction, keys):
    if isinstance(direction, str):
        direction = Direction(direction)
    if len(values) != len(keys) or len(values) < 3:
        raise ContractError(f"monotonicity needs at least 3 values matching the keys, got {len(values)}")
    if not all(math.isfinite(float(v)) for v in values):
        raise ContractError("monotonicity values must be finite")
    target = list(keys) if direction is Direction.INCREASING else [-k for k in keys]
    rho = spearman(values, target)
    return min(1.0, max(0.0, (1 - rho) / 2))


def metric_bayes(p_a, p_b, p_a_given_b, p_b_given_a):
    """|P(A|B) P(B) - P(B|A) P(A)| ** 0.5"""
    p_a = _probability("p(A)", p_a)
    p_b = _probability("p(B)", p_b)
    p_a_given_b = _probability("p(A|B)", p_a_given_b)
    p_b_given_a = _probability("p(B|A)", p_b_given_a)
    return math.sqrt(abs(p_a_given_b * p_b - p_b_given_a * p_a))


def tuple_metric(tup, values):
    kind = tup.kind
    if kind is TupleKind.NEGATION:
        return metric_negation(*values)
    if kind is TupleKind.BAYES:
        return metric_bayes(*values)
    if kind is TupleKind.MONOTONICITY:
        return metric_monotonicity(values, tup.direction, tup.keys)
    return metric_paraphrase(values)


def query_oracle(config, question_text, oracle=None, unit=Unit.PROBABILITY, question_id="", archive=None):
    """
    Ask one question ``config.repeats`` times and aggregate by median.
    Failed requests and unparseable answers become absent samples.
    """
    if oracle is None:
        from .oracles import build_oracle
        oracle = build_oracle(config)
    messages = config.prompt_for(unit).messages(question_text)
    samples, responses = [], []
    for repeat in range(config.repeats):
        try:
            text = oracle.complete(messages, temperature=config.temperature)
        except OracleError as e:
            log.warning("oracle request for %s failed: %s", question_id or question_text, e)
            text = None
        value = parse_answer(text, unit)
        if value is None:
            log.debug("discarded response %d for %s", repeat, question_id or question_text)
        samples.append(value)
        responses.append(text)
        if archive is not None:
            archive({"question_id": question_id, "repeat": repeat, "question": question_text,
                     "response": text, "parsed": value})
    try:
        value = aggregate_median(samples)
    except AggregationError as e:
        raise AggregationError(f"{question_id or question_text}: {e}") from e
    return Forecast(question_id=question_id, samples=samples, value=value, unit=unit, responses=responses)


def run_tuple(config, tup, oracle=None, archive=None):
    """Forecast every member of a tuple and score it with the tuple's metric"""
    if oracle is None:
        from .oracles import build_oracle
        oracle = build_oracle(config)
    forecasts = []
    try:
        for question_id, question in zip(tup.question_ids(), tup.questions):
            forecasts.append(query_oracle(config, question, oracle, tup.unit, question_id, archive))
    except AggregationError as e:
        log.warning("skipping tuple %s: %s", tup.id, e)
        raise
    values = [f.value for f in forecasts]
    detail = {"forecasts": values, "samples": [f.samples for f in forecasts]}
    return ViolationRecord(check=tup.kind.check, case_id=tup.id, inputs=tuple(tup.question_ids()),
                           value=tuple_metric(tup, values), detail=json.dumps(detail))


_TUPLE_FIELDS = {"id", "kind", "questions", "direction", "keys"}


def parse_tuples(items, source="<tuples>"):
    if isinstance(items, dict):
        items = items.get("tuples")
    if not isinstance(items, list):
        raise ConfigError(f"{source}: expected a list of tuples")
    tuples, seen = [], set()
    for index, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"{source}: entry {index} is not a mapping")
        unknown = set(item) - _TUPLE_FIELDS
        if unknown:
            warnings.warn(f"{source}: entry {index} has unknown keys {sorted(unknown)}")
        try:
            tup = QuestionTuple(id=str(item["id"]), kind=item["kind"], questions=item["questions"],
                                direction=item.get("direction"), keys=item.get("keys"))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{source}: entry {index}: {e!r}") from e
        if tup.id in seen:
            raise ConfigError(f"{source}: duplicate tuple id {tup.id!r}")
        seen.add(tup.id)
        tuples.append(tup)
    return tuples


def load_tuples(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: {e}") from e
    return parse_tuples(data, path)
