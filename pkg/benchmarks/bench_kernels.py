"""Benchmark the compiled allocation kernels against the pure-NumPy twins.

Sizes the workload like the largest stock scenario (100 users, 40 robots,
5 tiers) and times each kernel plus a composite engine tick. Run as:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from contractalloc import _kernels_py

try:
    from contractalloc import _kernels_cy
except ImportError:
    _kernels_cy = None


def make_workload(seed: int = 8):
    rng = np.random.default_rng(seed)
    users = rng.uniform(0, 10, size=(100, 2))
    robots = rng.uniform(0, 10, size=(40, 2))
    weights = rng.uniform(0.1, 2.0, size=100)
    return users, robots, weights


def time_call(fn, repeats: int) -> float:
    """Best-of-runs per-call seconds (min over batches of many calls)."""
    fn()  # warm up
    best = float("inf")
    inner = 50
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def tick(impl, users, robots, weights, alpha=0.1, beta=10.0, r_safe=0.5):
    """One engine-shaped step: assign, energy, both control fields."""
    assign = impl.nearest_assignment(users, robots)
    energy = impl.assigned_energy(users, weights, robots, assign)
    u1 = impl.attraction_controls(robots, users, weights, assign, alpha)
    u2, _ = impl.barrier_controls(robots, beta, r_safe)
    return energy, u1, u2


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing batches per kernel (default 20)")
    args = parser.parse_args()

    if _kernels_cy is None:
        print("compiled backend not built; run pip install -e . first")
        return 1

    users, robots, weights = make_workload()
    assign = _kernels_py.nearest_assignment(users, robots)
    # crowd the robots so the barrier actually has inside-radius pairs
    crowded = robots * 0.25 + 3.0

    cases = {
        "nearest_assignment": lambda impl: impl.nearest_assignment(users, robots),
        "assigned_energy": lambda impl: impl.assigned_energy(users, weights, robots, assign),
        "attraction_controls": lambda impl: impl.attraction_controls(
            robots, users, weights, assign, 0.1),
        "barrier_controls": lambda impl: impl.barrier_controls(crowded, 10.0, 0.5),
        "full tick": lambda impl: tick(impl, users, robots, weights),
    }

    print(f"workload: 100 users, 40 robots (largest stock scenario), "
          f"{args.repeats} timing batches")
    header = f"{'kernel':<22}{'numpy':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = time_call(lambda: call(_kernels_py), args.repeats)
        t_cy = time_call(lambda: call(_kernels_cy), args.repeats)
        print(f"{name:<22}{t_py * 1e6:>10.1f}us{t_cy * 1e6:>10.1f}us"
              f"{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
