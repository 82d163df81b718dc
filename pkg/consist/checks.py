"""
The four chess consistency checks.

Each check evaluates a position and positions derived from it and returns a
ChessCheckCase whose ``violation`` is measured in q-space. Across a move the
side to move changes, so a consistent evaluator satisfies q(s) = -q(s').
"""

import json
import logging
from dataclasses import dataclass, field

from .board import (Symmetry, all_symmetries, apply_move, is_forced,
                    is_symmetric_candidate, mirror_position, to_fen)
from .helpers import ConfigError, ProtocolError, requires
from .records import CheckKind, ViolationRecord, position_id

log = logging.getLogger(__name__)

SYMMETRY_LABELS = ("identity",) + tuple(s.value for s in Symmetry)


@dataclass
class ChessCheckCase:
    check: CheckKind
    base: object
    derived: list
    evaluations: list
    violation: float
    labels: list = field(default_factory=list)

    @property
    def boards(self):
        return [self.base] + list(self.derived)

    @property
    def fens(self):
        return [to_fen(b) for b in self.boards]

    def detail(self):
        rows = {
            "labels": list(self.labels),
            "q": [e.q for e in self.evaluations],
            "win_prob": [e.win_prob for e in self.evaluations],
        }
        moves = [e.best_move.uci() if e.best_move else None for e in self.evaluations]
        if any(moves):
            rows["best_move"] = moves
        return json.dumps(rows)

    def to_record(self, case_id):
        return ViolationRecord(check=self.check, case_id=case_id,
                               inputs=tuple(position_id(f) for f in self.fens),
                               value=self.violation, detail=self.detail())

    def input_map(self):
        return {position_id(f): f for f in self.fens}


def _is_legal(board):
    return board.is_valid()


def _has_moves(board):
    return board.is_valid() and any(True for _ in board.legal_moves)


@requires(lambda b: b.is_valid() and is_symmetric_candidate(b),
          "board must be legal with no pawns and no castling rights")
def check_transformations(evaluator, board):
    variants = all_symmetries(board)
    evaluations = [evaluator.evaluate(v) for v in variants]
    qs = [e.q for e in evaluations]
    return ChessCheckCase(CheckKind.BOARD_TRANSFORMATIONS, variants[0], variants[1:],
                          evaluations, max(qs) - min(qs), list(SYMMETRY_LABELS))


@requires(_is_legal, "board must be legal")
def check_mirroring(evaluator, board):
    mirrored = mirror_position(board)
    evaluations = [evaluator.evaluate(board), evaluator.evaluate(mirrored)]
    violation = abs(evaluations[0].q - evaluations[1].q)
    return ChessCheckCase(CheckKind.POSITION_MIRRORING, board.copy(stack=False), [mirrored],
                          evaluations, violation, ["original", "mirrored"])


def _successor_case(check, evaluator, board, move, first=None):
    successor = apply_move(board, move)
    first = first or evaluator.evaluate(board)
    evaluations = [first, evaluator.evaluate(successor)]
    violation = abs(evaluations[0].q + evaluations[1].q)
    return ChessCheckCase(check, board.copy(stack=False), [successor], evaluations, violation,
                          ["before", f"after {move.uci()}"])


@requires(lambda b: b.is_valid() and is_forced(b), "board must be legal with exactly one legal move")
def check_forced(evaluator, board):
    move = next(iter(board.legal_moves))
    return _successor_case(CheckKind.FORCED_MOVE, evaluator, board, move)


@requires(_has_moves, "board must be legal with at least one legal move")
def check_recommended(evaluator, board):
    first = evaluator.evaluate(board)
    move = first.best_move
    if move is None:
        raise ProtocolError(f"{evaluator.identity} gave no best move for {to_fen(board)}")
    if not board.is_legal(move):
        raise ProtocolError(f"{evaluator.identity} recommended illegal move {move.uci()} in {to_fen(board)}")
    return _successor_case(CheckKind.RECOMMENDED_MOVE, evaluator, board, move, first)


CHECKS = {
    CheckKind.BOARD_TRANSFORMATIONS: check_transformations,
    CheckKind.POSITION_MIRRORING: check_mirroring,
    CheckKind.FORCED_MOVE: check_forced,
    CheckKind.RECOMMENDED_MOVE: check_recommended,
}


def get_check(kind):
    if isinstance(kind, str):
        kind = CheckKind(kind)
    if kind not in CHECKS:
        raise ConfigError(f"{kind.value} is not a chess check")
    return CHECKS[kind]
