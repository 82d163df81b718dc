import errno
import functools
import hashlib
import os
import pickle


class ConsistError(Exception):
    """Base class of every error raised by the harness"""


class ConfigError(ConsistError, ValueError):
    pass


class RecordParseError(ConsistError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class FenError(ConsistError, ValueError):
    pass


class PreconditionError(ConsistError, ValueError):
    pass


class GenerationError(ConsistError, RuntimeError):
    pass


class EngineError(ConsistError, RuntimeError):
    pass


class EngineStartupError(EngineError):
    pass


class EngineTransportError(EngineError):
    def __init__(self, message, tail=()):
        tail = list(tail)
        if tail:
            message += "\n--- engine output tail ---\n" + "\n".join(tail)
        super().__init__(message)
        self.tail = tail


class ProtocolError(EngineError):
    pass


class InvariantError(ConsistError, ArithmeticError):
    pass


class ContractError(ConsistError, ValueError):
    pass


class AggregationError(ConsistError, ValueError):
    pass


class OracleError(ConsistError, RuntimeError):
    pass


def init_thresholds(thresholds):
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError(f"Thresholds must be strictly ascending: {thresholds}")
    return thresholds


def init_epsilon(epsilon):
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"Invalid epsilon: {epsilon}. Must lie in [0, 1]")
    return epsilon


def init_positive(name, value, minimum=1):
    if value is None or value < minimum:
        raise ConfigError(f"Invalid {name}: {value}. Must be >= {minimum}")
    return value


def init_fraction(name, value):
    value = float(value)
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"Invalid {name}: {value}. Must lie in (0, 1]")
    return value


def requires(predicate, message):
    """
    Decorator to protect operations taking ``(evaluator, board)``; the board
    must satisfy the predicate
    """

    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(evaluator, board, *args, **kwargs):
            if not predicate(board):
                raise PreconditionError(f"{fn.__name__}: {message}")
            return fn(evaluator, board, *args, **kwargs)

        return wrapper

    return decorator


def hashpath(text):
    h = hashlib.md5()
    h.update(text.encode("utf-8"))
    return h.hexdigest()


def hash_file(path, chunk_size=1 << 20):
    """Return the md5 hex digest of a file, or None if it cannot be read"""
    h = hashlib.md5()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(chunk_size), b""):
                h.update(chunk)
    except OSError:
        return None
    return h.hexdigest()


def load_cache(filename):
    """Return unpickled object, or None if cache unavailable"""
    if not filename:
        return None
    try:
        with open(filename, "rb") as fh:
            return pickle.load(fh)
    except (IOError, ValueError, EOFError, pickle.UnpicklingError):  # File missing, truncated, etc
        return None


def save_cache(filename, obj):
    tmp = filename + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            pickle.dump(obj, fh)
        os.replace(tmp, filename)
    except IOError as e:
        if e.errno != errno.EACCES:
            raise  # Not a permission error.
