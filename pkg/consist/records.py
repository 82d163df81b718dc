"""Violation records, result files and threshold-bucket statistics"""

import csv
import enum
import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field

import numpy as np

from .helpers import (ContractError, RecordParseError, hashpath,
                      init_epsilon, init_thresholds)

log = logging.getLogger(__name__)

CHESS_THRESHOLDS = (0.05, 0.1, 0.25, 0.5, 0.75, 1.0)
STRONG_EPSILON = 0.2


class CheckKind(enum.Enum):
    BOARD_TRANSFORMATIONS = "board_transformations"
    POSITION_MIRRORING = "position_mirroring"
    FORCED_MOVE = "forced_move"
    RECOMMENDED_MOVE = "recommended_move"
    NEGATION = "negation"
    PARAPHRASE = "paraphrase"
    MONOTONICITY = "monotonicity"
    BAYES_RULE = "bayes_rule"
    SELF_CONSISTENCY = "self_consistency"

    @property
    def is_chess(self):
        return self in CHESS_CHECKS

    @property
    def upper_bound(self):
        # q lives in [-1, 1]; forecast metrics in [0, 1]
        return 2.0 if self.is_chess else 1.0


CHESS_CHECKS = frozenset({CheckKind.BOARD_TRANSFORMATIONS, CheckKind.POSITION_MIRRORING,
                          CheckKind.FORCED_MOVE, CheckKind.RECOMMENDED_MOVE})


@dataclass(frozen=True)
class ViolationRecord:
    check: CheckKind
    case_id: str
    inputs: tuple
    value: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise ContractError(f"Record {self.case_id} has no inputs")
        if not math.isfinite(self.value) or self.value < 0:
            raise ContractError(f"Record {self.case_id} has invalid value {self.value}")
        if self.value > self.check.upper_bound:
            raise ContractError(f"Record {self.case_id}: {self.check.value} value {self.value} "
                                f"exceeds {self.check.upper_bound}")

    def to_dict(self):
        return {
            "check": self.check.value,
            "case_id": self.case_id,
            "inputs": list(self.inputs),
            "value": self.value,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(check=CheckKind(data["check"]),
                   case_id=str(data["case_id"]),
                   inputs=tuple(str(i) for i in data["inputs"]),
                   value=float(data["value"]),
                   detail=str(data.get("detail", "")))


def position_id(fen):
    """Short stable identifier of a position, used in records instead of the FEN"""
    return "p:" + hashpath(fen)[:16]


def _dump(record):
    return json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False)


class RecordSink:
    """
    Append-only line-delimited record file. Appends from concurrent producers
    are serialized; each record is written and flushed as one line.
    """

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)

    def append(self, record):
        line = _dump(record) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()

    def extend(self, records):
        lines = "".join(_dump(r) + "\n" for r in records)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(lines)
                fh.flush()

    def case_ids(self):
        """Case ids already present in the file (resume ledger)"""
        if not os.path.exists(self.path):
            return set()
        return {r.case_id for r in load_records(self.path)}


def persist_records(records, sink):
    """Write records to ``sink``: a RecordSink, a path or a writable text stream"""
    if isinstance(sink, RecordSink):
        sink.extend(records)
    elif isinstance(sink, (str, os.PathLike)):
        RecordSink(os.fspath(sink)).extend(records)
    else:
        for record in records:
            sink.write(_dump(record) + "\n")


def load_records(source):
    """Read records from a path or a text stream; blank lines are ignored"""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return load_records(fh)

    records = []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(ViolationRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as e:
            raise RecordParseError(lineno, f"malformed record: {e}") from e
    return records


class InputMap:
    """Sidecar map from input identifier to FEN or question text"""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._known = set(self.load(path)) if os.path.exists(path) else set()

    def add(self, input_id, text):
        with self._lock:
            if input_id in self._known:
                return
            self._known.add(input_id)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"id": input_id, "text": text}, ensure_ascii=False) + "\n")

    @staticmethod
    def load(path):
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    item = json.loads(line)
                    entries[item["id"]] = item["text"]
                except (ValueError, KeyError) as e:
                    raise RecordParseError(lineno, f"malformed input map entry: {e}") from e
        return entries


@dataclass
class BucketSummary:
    thresholds: list
    counts: list
    total: int
    mean: float = 0.0
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def fractions(self):
        if not self.total:
            return [0.0] * len(self.counts)
        return [c / self.total for c in self.counts]


def bucketize(values, thresholds=CHESS_THRESHOLDS):
    thresholds = init_thresholds(thresholds)
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise ContractError("Cannot bucketize non-finite values")
    arr = np.asarray(values, dtype=float)
    counts = [int(np.count_nonzero(arr > t)) for t in thresholds]
    # fsum is exactly rounded, so the mean does not depend on value order
    mean = math.fsum(values) / len(values) if values else 0.0
    return BucketSummary(thresholds=thresholds, counts=counts, total=len(values), mean=mean)


def strong_fraction(values, epsilon=STRONG_EPSILON):
    epsilon = init_epsilon(epsilon)
    values = list(values)
    if not values:
        return 0.0
    return sum(1 for v in values if v > epsilon) / len(values)


def summarize(records, thresholds=CHESS_THRESHOLDS, epsilon=STRONG_EPSILON):
    """Group records by check and bucketize each group, in CheckKind order"""
    grouped = {}
    for record in records:
        grouped.setdefault(record.check, []).append(record.value)
    summaries = []
    for check in CheckKind:
        if check not in grouped:
            continue
        summary = bucketize(grouped[check], thresholds)
        summary.label = check.value
        if not check.is_chess:
            summary.extra["strong_fraction"] = strong_fraction(grouped[check], epsilon)
        summaries.append(summary)
    return summaries


def threshold_header(t):
    return f"> {t:g}"


def write_summary_csv(summaries, path, label_name="check", epsilon=STRONG_EPSILON):
    """
    One row per summary, one column per threshold holding the fraction of
    values strictly above it. Mean and strong-violation columns are filled for
    forecast checks only.
    """
    if not summaries:
        thresholds = list(CHESS_THRESHOLDS)
    else:
        thresholds = summaries[0].thresholds
    with_forecast = any("strong_fraction" in s.extra for s in summaries)
    header = [label_name, "total"] + [threshold_header(t) for t in thresholds]
    if with_forecast:
        header += ["mean", f"strong > {epsilon:g}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in summaries:
            row = [s.label, s.total] + [repr(f) for f in s.fractions]
            if with_forecast:
                if "strong_fraction" in s.extra:
                    row += [repr(s.mean), repr(s.extra["strong_fraction"])]
                else:
                    row += ["", ""]
            writer.writerow(row)
    return path


def format_summary(summaries):
    """Plain-text rendering of summaries for terminal reports"""
    if not summaries:
        return "(no records)"
    thresholds = summaries[0].thresholds
    cols = [threshold_header(t) for t in thresholds]
    lines = ["%-24s %8s " % ("check", "total") + " ".join("%9s" % c for c in cols)]
    for s in summaries:
        cells = " ".join("%8.2f%%" % (100 * f) for f in s.fractions)
        line = "%-24s %8d %s" % (s.label, s.total, cells)
        if "strong_fraction" in s.extra:
            line += "  mean=%.3f strong=%.1f%%" % (s.mean, 100 * s.extra["strong_fraction"])
        lines.append(line)
    return "\n".join(lines)
