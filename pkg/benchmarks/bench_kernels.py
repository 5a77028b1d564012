"""Compiled versus pure-Python kernels on the same workloads.

    python benchmarks/bench_kernels.py [--repeats 3]

Each workload runs once per available backend; the table reports the best
wall time and checks that both backends return the same objective.
"""
import argparse
import time

import numpy as np

from scenopt import _kernels
from scenopt.opf import build_adaptive_opf, load_case
from scenopt.program import build_deterministic
from scenopt.solver import SolverConfig, linprog, solve_convex


def random_lp(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(-1, 1, size=n) + rng.uniform(0.1, 2.0, size=m)
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.concatenate([b, np.full(2 * n, 10.0)])
    return rng.normal(size=n), A, b


def workloads():
    for n, m in [(10, 500), (40, 2000), (80, 4000)]:
        c, A, b = random_lp(n, n, m)
        yield f"lp n={n} rows={A.shape[0]}", lambda cfg, c=c, A=A, b=b: linprog(c, A, b, cfg)
    for case, N in [("five_bus", 500), ("case57", 434)]:
        prog = build_deterministic(build_adaptive_opf(load_case(case), N, seed=0))
        yield f"opf {case} N={N}", lambda cfg, prog=prog: solve_convex(prog, cfg)
    d = 200_000

    def tail(cfg):
        k = _kernels.backends()[cfg.backend]
        return sum(k.binomial_tail(d, n, 1e-4) for n in range(1, 200))
    yield f"binomial tail d={d} x199", tail


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    names = sorted(_kernels.backends())
    print(f"{'workload':32s}" + "".join(f"{n:>12s}" for n in names) + "    speedup  agree")
    for label, fn in workloads():
        times, values = {}, {}
        for name in names:
            cfg = SolverConfig(backend=name)
            best = np.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                out = fn(cfg)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
            values[name] = getattr(out, "objective", out)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        vals = list(values.values())
        agree = all(abs(v - vals[0]) <= 1e-9 * (1 + abs(vals[0])) for v in vals)
        print(f"{label:32s}" + "".join(f"{times[n]:11.4f}s" for n in names)
              + f"  {speed:8.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
