"""
In-process evaluators used as test oracles for the harness itself.
"""

import dataclasses
import logging
import math

import chess

from .helpers import ConfigError
from .uci import Evaluation, Evaluator, Flavor, RawScore, ScoreKind

log = logging.getLogger(__name__)

PIECE_VALUES = {chess.QUEEN: 9, chess.ROOK: 5, chess.BISHOP: 3, chess.KNIGHT: 3, chess.PAWN: 1, chess.KING: 0}


def material_balance(board, color):
    """Material of ``color`` minus material of its opponent"""
    balance = 0
    for piece in board.piece_map().values():
        value = PIECE_VALUES[piece.piece_type]
        balance += value if piece.color == color else -value
    return balance


def _move_key(move):
    return (move.from_square, move.to_square, move.promotion or 0)


def first_move(board, prefer_quiet=True):
    moves = sorted(board.legal_moves, key=_move_key)
    if not moves:
        return None
    if prefer_quiet:
        for move in moves:
            if not move.promotion and not board.is_capture(move):
                return move
    return moves[0]


class MaterialEvaluator(Evaluator):
    """
    q = tanh(balance / 8) for the side to move. Invariant under every board
    symmetry and under position mirroring.

    The best move is the first legal move by (from, to, promotion) square
    order; with ``prefer_quiet`` captures and promotions are passed over when a
    quiet move exists, so that following the best move keeps q unchanged.
    """

    def __init__(self, prefer_quiet=True):
        self.prefer_quiet = prefer_quiet
        self.identity = "mock-material" + ("" if prefer_quiet else "-first")

    def evaluate(self, board, node_limit=None):
        q = math.tanh(material_balance(board, board.turn) / 8)
        return Evaluation(q=q, best_move=first_move(board, self.prefer_quiet),
                          nodes_used=node_limit or self.node_limit,
                          raw=RawScore(ScoreKind.Q_VALUE, q))


def white_king_queenside(board):
    king = board.king(chess.WHITE)
    return king is not None and chess.square_file(king) <= 3


def white_king_on_a1(board):
    return board.king(chess.WHITE) == chess.A1


def white_king_in_corner(board):
    return board.king(chess.WHITE) in (chess.A1, chess.H1, chess.A8, chess.H8)


PREDICATES = {
    "white-king-queenside": white_king_queenside,
    "white-king-a1": white_king_on_a1,
    "white-king-corner": white_king_in_corner,
}


def get_predicate(name):
    try:
        return PREDICATES[name]
    except KeyError:
        raise ConfigError(f"Unknown predicate {name!r}. Use one of {', '.join(PREDICATES)}") from None


class PlantedBugEvaluator(Evaluator):
    """Wraps an evaluator and shifts q by ``delta`` wherever ``predicate`` holds"""

    def __init__(self, inner, delta=0.3, predicate=white_king_queenside):
        if isinstance(predicate, str):
            predicate = get_predicate(predicate)
        self.inner = inner
        self.delta = float(delta)
        self.predicate = predicate
        self.node_limit = inner.node_limit
        self.identity = f"planted-bug({inner.identity},{predicate.__name__},{self.delta:g})"

    def evaluate(self, board, node_limit=None):
        evaluation = self.inner.evaluate(board, node_limit)
        if not self.predicate(board):
            return evaluation
        q = min(1.0, max(-1.0, evaluation.q + self.delta))
        return dataclasses.replace(evaluation, q=q, raw=RawScore(ScoreKind.Q_VALUE, q))


def mock_material(board):
    return MaterialEvaluator().evaluate(board)


def mock_planted_bug(inner, perturbation=0.3, predicate=white_king_queenside):
    """Planted-bug evaluator over ``inner``; call ``.evaluate(board)`` on the result"""
    return PlantedBugEvaluator(inner, perturbation, predicate)


class MinimaxEvaluator(Evaluator):
    """
    Exact negamax to a fixed depth: checkmate is -1 for the side to move,
    stalemate and dead positions 0. Lines undecided at the horizon also score
    0, so the result is exact only for positions decided within ``depth``
    plies, such as short mates in king and queen endings.
    """

    def __init__(self, depth=3):
        self.depth = depth
        self.identity = f"minimax-{depth}"

    def _negamax(self, board, depth):
        if board.is_checkmate():
            return -1.0, None
        if board.is_stalemate() or board.is_insufficient_material() or depth == 0:
            return 0.0, None
        best, best_move = -math.inf, None
        for move in sorted(board.legal_moves, key=_move_key):
            board.push(move)
            value = -self._negamax(board, depth - 1)[0]
            board.pop()
            if value > best:
                best, best_move = value, move
                if best >= 1.0:
                    break
        return best, best_move

    def evaluate(self, board, node_limit=None):
        q, move = self._negamax(board.copy(stack=False), self.depth)
        return Evaluation(q=q, draw_prob=None, best_move=move,
                          nodes_used=node_limit or self.node_limit,
                          raw=RawScore(ScoreKind.Q_VALUE, q))


def build_mock(config):
    """Evaluator for an engine config of the mock flavor"""
    options = dict(config.mock)
    kind = options.pop("kind", "material")
    base = MaterialEvaluator(prefer_quiet=options.pop("prefer_quiet", True))
    if kind == "material":
        evaluator = base
    elif kind == "planted-bug":
        evaluator = PlantedBugEvaluator(base, delta=options.pop("delta", 0.3),
                                        predicate=options.pop("predicate", "white-king-queenside"))
    elif kind == "minimax":
        evaluator = MinimaxEvaluator(depth=options.pop("depth", 3))
    else:
        raise ConfigError(f"Unknown mock kind {kind!r}")
    if options:
        raise ConfigError(f"Unknown mock parameters: {', '.join(sorted(options))}")
    evaluator.node_limit = config.node_limit
    evaluator.flavor = Flavor.MOCK
    log.debug("using in-process evaluator %s", evaluator.identity)
    return evaluator
