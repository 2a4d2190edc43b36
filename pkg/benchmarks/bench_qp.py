"""Compare the compiled and pure-Python QP kernels.

    python3 benchmarks/bench_qp.py [--problems 2000] [--seed 0]

Each kernel solves the same random feasible problems; the table reports
per-solve wall time (including the shared Python wrapper) and checks that
both kernels return the same solution.
"""

import argparse
import time

import numpy as np

from barrierkit import qp
from barrierkit.qp import QpProblem, solve

SHAPES = [(1, 2), (2, 4), (2, 8), (3, 6), (4, 12)]


def problems(rng, m, k, count):
    out = []
    for _ in range(count):
        A = rng.normal(size=(k, m))
        b = A @ rng.normal(size=m) - rng.uniform(0.0, 1.0, k)
        out.append(QpProblem(np.eye(m), rng.normal(size=m) * 3.0, A, b))
    return out


def time_kernel(batch, kernel):
    for p in batch[:20]:
        solve(p, kernel=kernel)
    times = np.empty(len(batch))
    sols = []
    for i, p in enumerate(batch):
        t0 = time.perf_counter()
        sols.append(solve(p, kernel=kernel).u_star)
        times[i] = time.perf_counter() - t0
    return times, sols


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problems", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    kernels = sorted(qp.KERNELS)
    if "compiled" not in kernels:
        print("compiled kernel not built; only the python kernel is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'m':>2} {'k':>3}  {'kernel':<9}{'median us':>11}{'p99 us':>10}  speedup  max |du|")
    for m, k in SHAPES:
        batch = problems(rng, m, k, args.problems)
        results = {name: time_kernel(batch, name) for name in kernels}
        base = np.median(results["python"][0])
        for name in kernels:
            times, sols = results[name]
            gap = max(float(np.max(np.abs(a - b))) for a, b in zip(sols, results["python"][1]))
            print(f"{m:>2} {k:>3}  {name:<9}{np.median(times) * 1e6:>11.1f}"
                  f"{np.percentile(times, 99) * 1e6:>10.1f}  {base / np.median(times):>6.2f}x"
                  f"  {gap:.1e}")


if __name__ == "__main__":
    main()
