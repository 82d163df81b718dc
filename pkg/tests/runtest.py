#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Run every cover test in its own interpreter process and tally the results

Usage: runtest.py [...]
  --listtests      - list all tests
  --test name      - add test name (e.g. board or test_board)
  --test @file     - add tests from file
  --interp path    - test against specified interpreters
  --interp @file   - read interpreters list from file
  --fast           - skip tests marked slow
  --help           - this page
"""

import os
import sys
import traceback

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "cover"))
import common  # test utilities


def find_python_version(pylst):
    lst = []
    ids = []
    for interp in pylst:
        try:
            std, err = common.exec_cmd([interp, "-V"])
            version = (std.strip() or err.strip())
            if version[:6] != "Python":
                common.err("Not a python", interp, version)
                continue
            shver = version[6:].strip().replace(" ", "-")
            nid, nidn = shver, 0
            while nid in ids:
                nidn += 1
                nid = "%s-%d" % (shver, nidn)
            ids.append(nid)
            lst.append((interp, nid, version))
        except OSError:
            traceback.print_exc()
    return lst


def search_tests():
    base = os.path.join(common.basepath, "cover")
    lst = [os.path.join(base, item) for item in os.listdir(base)
           if item.startswith("test_") and item.endswith(".py")]
    lst.sort()
    return lst


def prepare_dest(interp):
    destpath = os.path.join(common.basepath, "out-" + interp[1])
    if not os.path.exists(destpath):
        os.makedirs(destpath)
    env = {}
    with open(os.path.join(destpath, "testlog.txt"), "w", encoding="utf-8") as f:
        f.write("Version: " + interp[1] + "\n")
        f.write("Path: " + interp[0] + "\n")
        std, err = common.exec_cmd([interp[0], "-B", os.path.join(common.basepath, "cover", "checkenv.py")])
        lines = std.splitlines()
        if err.strip() or not lines or lines[0].strip() != "CHECK":
            f.write("ERROR:\n" + err)
            return destpath, env
        f.write("Check environment - ok:\n" + std)
        for line in lines[1:]:
            key, sep, value = line.partition("=")
            if sep:
                env[key.strip().lower()] = value.strip()
    return destpath, env


def do_test_one(testfile, interp, dest):
    destpath, destenv = dest
    if destenv.get("ver", "None") == "None":
        return "noconsist"
    std, err = common.exec_cmd([interp[0], "-B", testfile, "--auto"])
    with open(os.path.join(destpath, "testlog.txt"), "a", encoding="utf-8") as f:
        f.write("#" * 40 + "\n")
        f.write(os.path.basename(testfile) + "\n")
        f.write("=" * 40 + "\n")
        f.write(std)
        f.write("-" * 40 + "\n")
        f.write(err)
    answ = std.strip().splitlines()
    # tests may log above the status word; the status word comes last
    if not answ or answ[-1] not in ("OK", "FAIL", "SKIP"):
        return "fail"
    return answ[-1].lower()


def stat_str(stat):
    st = "total - %d" % stat["_"]
    for key in sorted(k for k in stat if k != "_"):
        st += ", %s - %d" % (key, stat[key])
    return st


def do_all_test(interps, tests):
    common.log(">> Interpreters:", len(interps))
    for idx, interp in enumerate(interps):
        common.log("%d) %s - %s" % (idx + 1, interp[1], interp[0]))
    common.log()

    dests = {interp[1]: prepare_dest(interp) for interp in interps}
    stats = {"_": {"_": 0}}
    stats.update((interp[1], {"_": 0}) for interp in interps)

    common.log(">> Tests:", len(tests))
    for idx, test in enumerate(tests):
        common.log("Test %d / %d : %s" % (idx + 1, len(tests), os.path.basename(test)))
        resall = ""
        for interp in interps:
            res = do_test_one(test, interp, dests[interp[1]])
            for key in ("_", interp[1]):
                stats[key]["_"] += 1
                stats[key][res] = stats[key].get(res, 0) + 1
            resall += interp[1] + " - " + (res + " " * 10)[:6].upper() + "  "
        common.log(resall)
    common.log()

    common.log(">> Statistics:")
    for interp in interps:
        common.log(interp[1] + ":", stat_str(stats[interp[1]]))
    common.log("-" * 10)
    common.log("All:", stat_str(stats["_"]))
    if stats["_"].get("noconsist"):
        common.log("*** consist is not importable; run from the source tree or install it with")
        common.log("***   python setup.py install")
    return stats["_"].get("fail", 0)


def list_tests():
    tst = search_tests()
    common.log(">> Tests:", len(tst))
    for idx, test in enumerate(tst):
        common.log("%d) %s" % (idx + 1, os.path.basename(test)[5:-3]))
    common.log()


def read_list(fn):
    with open(fn, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def main(args):
    tests, interps = [], []
    while args:
        arg = args.pop(0)
        if arg in ("--help", "-h"):
            common.log(__doc__)
            return 0
        if arg == "--listtests":
            list_tests()
            return 0
        if arg == "--fast":
            os.environ["PYCONSISTTESTFAST"] = "1"
        elif arg in ("--test", "--interp"):
            if not args:
                common.err("Param without value")
                return 2
            value = args.pop(0)
            values = read_list(value[1:]) if value.startswith("@") else [value]
            (tests if arg == "--test" else interps).extend(values)
        else:
            common.err("Unknown param", arg)
            return 2

    available = search_tests()
    if tests:
        selected = []
        for name in tests:
            name = name if name.startswith("test_") else "test_" + name
            name = name if name.endswith(".py") else name + ".py"
            path = os.path.join(common.basepath, "cover", name)
            if path not in available:
                common.err("Test not found", name)
                return 2
            selected.append(path)
        tests = selected
    else:
        tests = available
    return 1 if do_all_test(find_python_version(interps or [sys.executable]), tests) else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
