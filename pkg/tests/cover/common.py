# -*- coding: utf-8 -*-

# common utilities for pyconsist tests
# Note: 1) import this file before importing consist
#       2) keep this file in the tests/cover folder
#       3) a test file declares its needs in a header block, e.g.
#          #pyconsist-cover-test:env=PYCONSIST_ENGINE

import inspect
import os
import random
import shutil
import subprocess
import sys
import tempfile
import unittest

basepath = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
rootpath = os.path.abspath(os.path.join(basepath, ".."))

# if PYCONSISTTESTINSTALLED is not set - test the working tree, not an installed copy
if "PYCONSISTTESTINSTALLED" not in os.environ and rootpath not in sys.path:
    sys.path.insert(0, rootpath)

MARK = "#pyconsist-cover-test:"

FAKE_ENGINE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fake_uci.py")

KIWIPETE = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"
# black king cornered, Kb8 is the only move; after it Qc7 or Qb7 mates
FORCED_KQK = "k7/8/1KQ5/8/8/8/8/8 b - - 0 1"
PAWNLESS = "4k3/8/2r5/8/8/3Q4/8/4K3 w - - 0 1"


def exec_cmd(cmd):
    "Execute command and return console output (stdout, stderr)"
    proc = subprocess.run(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    return proc.stdout.decode("utf-8", "replace"), proc.stderr.decode("utf-8", "replace")


def writer(stream, items):
    stream.write(" ".join(str(item) for item in items))
    stream.write("\n")


def log(*kw):
    writer(sys.stdout, kw)


def err(*kw):
    writer(sys.stderr, kw)


def rng(seed=0):
    return random.Random(seed)


def fake_engine_config(mode="wdl", flavor="stockfish", **kw):
    "EngineConfig driving tests/cover/fake_uci.py in the given mode"
    from consist.uci import EngineConfig

    kw.setdefault("handshake_timeout", 20.0)
    kw.setdefault("eval_timeout", 20.0)
    kw.setdefault("options", {"Threads": 1})
    return EngineConfig(executable=sys.executable, args=["-B", FAKE_ENGINE, mode],
                        flavor=flavor, name="fake-" + mode, **kw)


def read_cover_info(fn):
    "Read the header block of a cover test"
    info = {"env": []}
    in_header = False
    with open(fn, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line.startswith(MARK):
                in_header = True
                key, _, value = line[len(MARK):].partition("=")
                if key == "env":
                    info["env"].append(value)
                elif key:
                    info[key] = value
            elif in_header and not line:
                break
    return info


def skip_reason(settings):
    "Check if test should be skipped"
    missing = [name for name in settings.get("env", []) if not os.environ.get(name)]
    if missing:
        return "set %s to run" % ", ".join(missing)
    plat = settings.get("platform", "*") or "*"
    if plat != "*" and sys.platform not in plat.split(","):
        return "not for \"" + sys.platform + "\""
    if settings.get("slow", "no") == "yes" and "PYCONSISTTESTFAST" in os.environ:
        return "slow test"
    return None


_registry = {}


def add_unittest(testfunc):
    """Decorator to add "unittest" test case class

    The test function takes a scratch directory, removed afterwards.
    """

    class Test(unittest.TestCase):
        def setUp(self):
            self.workdir = tempfile.mkdtemp(prefix="pyconsist-")

        def tearDown(self):
            shutil.rmtree(self.workdir, ignore_errors=True)

        def runTest(self):
            testfunc(self.workdir)

    name = testfunc.__name__ + "_unittest"
    Test.__name__ = Test.__qualname__ = name
    Test.__module__ = testfunc.__module__

    Test.settings = read_cover_info(inspect.getsourcefile(testfunc))
    reason = skip_reason(Test.settings)
    if reason is not None:
        Test = unittest.skip(reason)(Test)

    setattr(inspect.getmodule(testfunc), name, Test)
    _registry.setdefault(testfunc.__module__, []).append(Test)
    return testfunc


def testmain(fn):
    "Run the tests of one file; with --auto print a single status word"
    autotest = "--auto" in sys.argv[1:]
    reason = skip_reason(read_cover_info(fn))
    if reason is not None:
        if autotest:
            log("SKIP")
        else:
            err(reason)
        return
    suite = unittest.TestSuite(case() for case in _registry.get("__main__", []))
    stream = open(os.devnull, "w") if autotest else sys.stderr
    try:
        result = unittest.TextTestRunner(stream=stream, verbosity=1 if autotest else 2).run(suite)
    finally:
        if autotest:
            stream.close()
    if autotest:
        log("OK" if result.wasSuccessful() else "FAIL")
    elif not result.wasSuccessful():
        sys.exit(1)
