"""Compare the compiled scan kernels against the pure-python fallback.

Runs the same randomized workload through both backends (the fallback is
selected with CFLAB_PURE_PYTHON=1 in a subprocess) and prints the per-call
time and speedup.  Usage: python benchmarks/bench_kernels.py [--calls N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def run_workload(calls: int, seed: int = 0) -> dict:
    from cflab import kernels

    rng = np.random.default_rng(seed)
    n_re = 51
    bitmaps = rng.integers(0, 2, size=(256, n_re)).astype(np.uint8)
    owner_count = rng.integers(0, 3, size=(256, n_re)).astype(np.uint8)
    owner0 = rng.integers(1, 5, size=(256, n_re)).astype(np.int64)
    lengths = rng.integers(1, n_re + 1, size=256)

    t0 = time.perf_counter()
    acc = 0
    for i in range(calls):
        k = i % 256
        s, ln = kernels.find_zero_run(bitmaps[k], int(lengths[k]))
        acc += s + ln
    t_zero = time.perf_counter() - t0

    t0 = time.perf_counter()
    for i in range(calls):
        k = i % 256
        s, ln, r = kernels.find_single_owner_run(
            bitmaps[k], owner_count[k], owner0[k], int(lengths[k]))
        acc += s + ln + r
    t_owner = time.perf_counter() - t0

    return {"backend": kernels.BACKEND, "calls": calls, "checksum": acc,
            "zero_run_us": t_zero / calls * 1e6,
            "owner_run_us": t_owner / calls * 1e6}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--calls", type=int, default=200_000)
    args = parser.parse_args()

    if os.environ.get("_BENCH_CHILD") == "1":
        print(json.dumps(run_workload(args.calls)))
        return

    results = {}
    for backend, extra_env in (("compiled", {}), ("pure", {"CFLAB_PURE_PYTHON": "1"})):
        env = dict(os.environ, _BENCH_CHILD="1", **extra_env)
        out = subprocess.run([sys.executable, __file__, "--calls", str(args.calls)],
                             env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(out.stdout)
        assert results[backend]["backend"] == backend, results[backend]

    assert results["pure"]["checksum"] == results["compiled"]["checksum"], \
        "backends disagree on results"
    print(f"{args.calls} calls per kernel, both backends, identical results")
    for name in ("zero_run_us", "owner_run_us"):
        pure = results["pure"][name]
        comp = results["compiled"][name]
        print(f"  {name:<14} pure {pure:8.3f} us/call   compiled {comp:8.3f} us/call"
              f"   speedup {pure / comp:5.1f}x")


if __name__ == "__main__":
    main()
