"""
Campaign defaults, configuration files and engine presets.
"""

import copy
import logging
import os

import yaml

from .helpers import ConfigError, init_epsilon, init_fraction, init_positive, init_thresholds
from .records import CHESS_THRESHOLDS, STRONG_EPSILON
from .uci import EngineConfig

log = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
ENGINE_PRESETS = os.path.join(DATA_DIR, "engines.yaml")
SAMPLE_TUPLES = os.path.join(DATA_DIR, "sample_tuples.yaml")

# preset keys that describe a preset rather than configure the engine
PRESET_METADATA = ("description", "parity_nodes")


class CampaignSettings:

    def __init__(self, seed=0, workers=1, thresholds=CHESS_THRESHOLDS, epsilon=STRONG_EPSILON,
                 max_failure_rate=0.01, node_limit=400, sample_cap=None,
                 handshake_timeout=30.0, eval_timeout=300.0, cp_scale=300.0):

        self.seed = int(seed)
        self.workers = init_positive("workers", workers)
        self.thresholds = init_thresholds(thresholds)
        self.epsilon = init_epsilon(epsilon)
        self.max_failure_rate = self.init_failure_rate(max_failure_rate)
        self.node_limit = init_positive("node_limit", node_limit)
        self.sample_cap = None if sample_cap is None else init_positive("sample_cap", sample_cap)

        self.handshake_timeout = float(handshake_timeout)   # seconds until uciok/readyok
        self.eval_timeout = float(eval_timeout)             # seconds for one search
        self.cp_scale = float(cp_scale)                     # centipawns per logistic unit

    @staticmethod
    def init_failure_rate(rate):
        rate = float(rate)
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"Invalid failure rate: {rate}. Must lie in [0, 1)")
        return rate

    @classmethod
    def from_mapping(cls, values):
        known = {k: v for k, v in values.items() if k in cls.FIELDS and v is not None}
        return cls(**known)

    FIELDS = ("seed", "workers", "thresholds", "epsilon", "max_failure_rate", "node_limit",
              "sample_cap", "handshake_timeout", "eval_timeout", "cp_scale")


def load_yaml(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    return data if data is not None else {}


def load_config(path, section=None):
    """
    Flat mapping of settings from a YAML file. With ``section``, top-level keys
    are overridden by the keys of that section (e.g. ``chess-scan:``).
    """
    data = load_yaml(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    flat = {k: v for k, v in data.items() if not isinstance(v, dict) or k in ("options", "mock")}
    if section and isinstance(data.get(section), dict):
        flat.update(data[section])
    return {k.replace("-", "_"): v for k, v in flat.items()}


def merge_settings(defaults, file_values, cli_values):
    """CLI flags win over the config file, which wins over defaults"""
    merged = dict(defaults)
    merged.update({k: v for k, v in file_values.items() if v is not None})
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    return merged


def load_presets(path=ENGINE_PRESETS):
    presets = load_yaml(path)
    if not isinstance(presets, dict):
        raise ConfigError(f"{path}: expected a mapping of preset names")
    return presets


def engine_config(preset, presets=None, **overrides):
    """
    EngineConfig from a named preset with overrides applied; None overrides
    are ignored, ``options`` overrides are merged into the preset's options.
    """
    presets = presets if presets is not None else load_presets()
    if preset not in presets:
        raise ConfigError(f"Unknown engine preset {preset!r}. Use one of {', '.join(presets)}")
    values = copy.deepcopy(presets[preset])
    for key in PRESET_METADATA:
        values.pop(key, None)
    extra_options = overrides.pop("options", None) or {}
    values.setdefault("options", {}).update(extra_options)
    values.update({k: v for k, v in overrides.items() if v is not None})
    values.setdefault("name", preset)
    try:
        return EngineConfig(**values)
    except TypeError as e:
        raise ConfigError(f"Bad engine preset {preset!r}: {e}") from e
