"""Time the compiled and pure-Python controller search on the reduced tasks.

    python benchmarks/bench_tmc.py [--repeat 3] [--tasks swap_t,press_button]

Both backends run the same branch-and-bound, so node counts must agree; the
script exits non-zero if they do not.
"""

from __future__ import annotations

import argparse
import sys
import time

from memtask.tasks import TASK_NAMES, build_task
from memtask.tmc import _search_c, run_search, tabulate

# Reduced instances whose pure-Python search finishes in seconds.
DEFAULT_TASKS = ("put_back_block", "swap_blocks", "swap_t", "battery_try", "press_button")


def bench(table, m, backend, repeat):
    n = len(table.init)
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_search(table, m, 50_000_000, n, n - 1, backend)
        best = min(best, time.perf_counter() - t0)
    return best, out[2]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tasks", default=",".join(DEFAULT_TASKS))
    ap.add_argument("--m", type=int, default=1)
    args = ap.parse_args(argv)
    if _search_c is None:
        print("compiled kernel not built; reinstall with Cython available", file=sys.stderr)
        return 1
    print(f"{'task':22s} {'m':>2s} {'nodes':>9s} {'python s':>9s} {'cython s':>9s} {'speedup':>8s}")
    ok = True
    for name in args.tasks.split(","):
        if name not in TASK_NAMES:
            print(f"unknown task {name}", file=sys.stderr)
            return 1
        spec = build_task(name + "_reduced") if build_task(name).REDUCED else build_task(name)
        table = tabulate(spec)
        tp, np_ = bench(table, args.m, "python", args.repeat)
        tc, nc = bench(table, args.m, "cython", args.repeat)
        ok &= np_ == nc
        print(f"{name:22s} {args.m:2d} {nc:9d} {tp:9.4f} {tc:9.4f} {tp / max(tc, 1e-9):8.1f}x"
              + ("" if np_ == nc else f"  NODE MISMATCH python={np_}"))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
