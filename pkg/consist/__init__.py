#!/usr/bin/env python
# -*- coding: utf-8 -*-

"Consistency checks for superhuman chess engines and forecasting models"

__license__ = "LGPL 3.0"
__version__ = "0.1.0"

from .helpers import ConsistError
from .records import CheckKind, ViolationRecord, bucketize, load_records, persist_records, summarize
from .board import Symmetry, apply_symmetry, mirror_position, parse_fen, to_fen
from .uci import EngineConfig, Evaluation, Flavor, start_engine
