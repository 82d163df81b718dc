"""
Chess positions for the consistency checks.

Boards are ``chess.Board`` objects treated as values: every operation here
returns a fresh board and never mutates its argument.
"""

import collections
import enum
import logging

import chess

from .helpers import FenError, GenerationError, PreconditionError

log = logging.getLogger(__name__)

START_FEN = chess.STARTING_FEN
NON_KING_KINDS = (chess.QUEEN, chess.ROOK, chess.BISHOP, chess.KNIGHT)


class Symmetry(enum.Enum):
    """The 7 non-identity elements of the dihedral group of the board"""
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    MIRROR_X = "mirror_x"                  # rank r -> 7 - r
    MIRROR_Y = "mirror_y"                  # file f -> 7 - f
    MIRROR_DIAG_MAIN = "mirror_diag_main"  # a1-h8 diagonal
    MIRROR_DIAG_ANTI = "mirror_diag_anti"  # h1-a8 diagonal

    @property
    def transform(self):
        return _TRANSFORMS[self]


# Rot90 sends (file f, rank r) to (file r, rank 7 - f)
_TRANSFORMS = {
    Symmetry.ROT90: lambda bb: chess.flip_vertical(chess.flip_diagonal(bb)),
    Symmetry.ROT180: lambda bb: chess.flip_vertical(chess.flip_horizontal(bb)),
    Symmetry.ROT270: lambda bb: chess.flip_horizontal(chess.flip_diagonal(bb)),
    Symmetry.MIRROR_X: chess.flip_vertical,
    Symmetry.MIRROR_Y: chess.flip_horizontal,
    Symmetry.MIRROR_DIAG_MAIN: chess.flip_diagonal,
    Symmetry.MIRROR_DIAG_ANTI: chess.flip_anti_diagonal,
}

ROTATIONS = (Symmetry.ROT90, Symmetry.ROT180, Symmetry.ROT270)
FLIPS = (Symmetry.MIRROR_X, Symmetry.MIRROR_Y, Symmetry.MIRROR_DIAG_MAIN, Symmetry.MIRROR_DIAG_ANTI)


def map_square(symmetry, square):
    """Image of a single square under a symmetry"""
    return chess.lsb(symmetry.transform(chess.BB_SQUARES[square]))


def describe_status(status):
    names = [flag.name.lower() for flag in chess.Status if flag and flag in status]
    return ", ".join(names) or "valid"


def require_legal(board):
    status = board.status()
    if status != chess.STATUS_VALID:
        raise PreconditionError(f"Illegal board {board.fen()}: {describe_status(status)}")
    return board


def parse_fen(text):
    """Parse a six-field FEN string into a legal board"""
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"Expected 6 FEN fields, got {len(fields)}: {text!r}")
    try:
        board = chess.Board(" ".join(fields))
    except ValueError as e:
        raise FenError(f"Malformed FEN {text!r}: {e}") from e
    status = board.status()
    if status != chess.STATUS_VALID:
        raise FenError(f"Illegal position {text!r}: {describe_status(status)}")
    return board


def to_fen(board):
    # the en passant square is written after every double push, as in the FEN standard
    return board.fen(en_passant="fen")


def read_positions(path):
    """
    Read an EPD-style position list: one FEN per line, ``#`` comments and
    blank lines ignored. Four-field EPD lines get clocks ``0 1``.
    """
    boards = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) >= 6 and fields[4].isdigit() and fields[5].isdigit():
                fen = " ".join(fields[:6])
            elif len(fields) >= 4:
                fen = " ".join(fields[:4] + ["0", "1"])
            else:
                raise FenError(f"{path}:{lineno}: not a FEN line: {line!r}")
            try:
                boards.append(parse_fen(fen))
            except FenError as e:
                raise FenError(f"{path}:{lineno}: {e}") from e
    return boards


def legal_moves(board):
    require_legal(board)
    return list(board.legal_moves)


def perft(board, depth):
    """Number of leaf nodes of the legal move tree of the given depth"""
    if depth == 0:
        return 1
    board = board.copy(stack=False)

    def walk(depth):
        if depth == 1:
            return board.legal_moves.count()
        nodes = 0
        for move in list(board.legal_moves):
            board.push(move)
            nodes += walk(depth - 1)
            board.pop()
        return nodes

    return walk(depth)


def apply_move(board, move):
    if isinstance(move, str):
        move = chess.Move.from_uci(move)
    if not board.is_legal(move):
        raise PreconditionError(f"Illegal move {move} in {to_fen(board)}")
    successor = board.copy(stack=False)
    successor.push(move)
    return successor.copy(stack=False)


def is_symmetric_candidate(board):
    """Pawnless and without castling rights: every board symmetry preserves meaning"""
    return not board.pawns and not board.castling_rights


def apply_symmetry(board, symmetry):
    if not is_symmetric_candidate(board):
        raise PreconditionError(f"{symmetry.value} needs a board without pawns and castling rights: "
                                f"{to_fen(board)}")
    image = board.transform(symmetry.transform)
    image.ep_square = None
    return image


def all_symmetries(board):
    """The board followed by its 7 symmetric variants"""
    return [board.copy(stack=False)] + [apply_symmetry(board, s) for s in Symmetry]


def mirror_position(board):
    """Swap colors and reflect ranks; side to move, castling and en passant follow"""
    return board.mirror()


def is_forced(board):
    return board.legal_moves.count() == 1


def _minor_major_count(board):
    return chess.popcount(board.occupied & ~board.pawns & ~board.kings)


def is_middle_game(board):
    """
    Master-game middle-game filter: after move 15, at least 10 pieces, more
    than 5 non-pawn non-king pieces, and a queen or more than 6 of those.
    """
    officers = _minor_major_count(board)
    return (board.fullmove_number > 15
            and chess.popcount(board.occupied) >= 10
            and officers > 5
            and (bool(board.queens) or officers > 6))


def piece_multiset(board, color):
    return collections.Counter(p.piece_type for p in board.piece_map().values() if p.color == color)


def random_pawnless(rng, max_attempts=10000):
    """
    Sample a legal 8-piece board without pawns or castling: each side gets a
    king and the same three pieces drawn with replacement from Q, R, B, N.
    """
    for _ in range(max_attempts):
        kinds = [rng.choice(NON_KING_KINDS) for _ in range(3)]
        squares = rng.sample(chess.SQUARES, 8)
        turn = rng.choice((chess.WHITE, chess.BLACK))

        board = chess.Board.empty()
        pieces = [chess.KING] + kinds
        for square, kind in zip(squares[:4], pieces):
            board.set_piece_at(square, chess.Piece(kind, chess.WHITE))
        for square, kind in zip(squares[4:], pieces):
            board.set_piece_at(square, chess.Piece(kind, chess.BLACK))
        board.turn = turn
        if board.is_valid():
            return board
    raise GenerationError(f"No legal pawnless board after {max_attempts} attempts")


def random_playout(rng, plies, start=None):
    """Play up to ``plies`` uniformly random legal moves from ``start``"""
    board = (start or chess.Board()).copy(stack=False)
    for _ in range(plies):
        moves = list(board.legal_moves)
        if not moves:
            break
        board.push(rng.choice(moves))
    return board.copy(stack=False)
