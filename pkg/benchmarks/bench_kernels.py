"""Compare the compiled and numpy kernels on the DP and Monte Carlo hot loops.

Run with ``python3 benchmarks/bench_kernels.py [--quick]``.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from weylwalk import backend
from weylwalk.exact import LatticeWalkSpec, run_dp
from weylwalk.montecarlo import simulate_exits
from weylwalk.walk import StepDistribution


def timed(fn, repeat: int = 3) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    n_dp = 300 if args.quick else 1000
    n_mc = 20_000 if args.quick else 100_000
    cases = [
        ("dp C k=1", lambda b: run_dp(LatticeWalkSpec.rademacher(1), "C", (1,), 4 * n_dp, want_h=False, backend=b)),
        ("dp C k=2", lambda b: run_dp(LatticeWalkSpec.rademacher(2), "C", (1, 2), n_dp, backend=b)),
        ("dp D k=2 lazy", lambda b: run_dp(LatticeWalkSpec.lazy(2), "D", (0, 3), n_dp, backend=b)),
        ("dp C k=3", lambda b: run_dp(LatticeWalkSpec.rademacher(3), "C", (1, 2, 3), n_dp // 10, backend=b)),
        ("mc C k=2", lambda b: simulate_exits(StepDistribution.rademacher(2), "C", (1, 2), 200, n_mc, backend=b)),
        ("mc D k=3", lambda b: simulate_exits(StepDistribution.lazy(3), "D", (0, 2, 4), 200, n_mc, backend=b)),
    ]
    names = backend.available_backends()
    print(f"{'case':<16}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases:
        times, outs = [], []
        for b in names:
            t, out = timed(lambda: fn(b), repeat=1 if not args.quick else 2)
            times.append(t)
            outs.append(out)
        if len(outs) == 2:
            a, c = outs
            if hasattr(a, "surv"):
                assert np.allclose(a.surv, c.surv, rtol=1e-12, atol=1e-300)
            else:
                assert np.array_equal(a.tau, c.tau)
        row = f"{label:<16}" + "".join(f"{t:>11.3f}s" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
