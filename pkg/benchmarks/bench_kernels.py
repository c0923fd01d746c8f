"""Compare the compiled kernels against the pure-Python fallback.

Runs the same workloads through both backends in subprocesses (backend choice
is fixed at import time) and prints a small table. Usage:

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = ["lu_factor", "lu_solve", "simulation_10s", "powerflow"]

_CHILD = r"""
import json, time
import numpy as np

from swingbus import backend_name
from swingbus.case import load_bundled
from swingbus.dynamics import SimulationConfig, simulate
from swingbus.network import FaultEvent
from swingbus.powerflow import solve_power_flow
from swingbus.sparse import SparseComplexMatrix, SymbolicLu

def random_system(rng, n, density):
    pattern = rng.random((n, n)) < density
    pattern |= pattern.T
    np.fill_diagonal(pattern, True)
    vals = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = np.where(pattern, vals, 0)
    np.fill_diagonal(a, 0)
    a[np.arange(n), np.arange(n)] = np.abs(a).sum(axis=1) + 1.0 + 0.5j
    rows, cols = np.nonzero(a)
    return SparseComplexMatrix.from_triplets(n, rows, cols, a[rows, cols])

def main(repeat):
    rng = np.random.default_rng(0)
    m = random_system(rng, 500, 0.01)
    sym = SymbolicLu(m)
    res = {"backend": backend_name()}

    t0 = time.perf_counter()
    for _ in range(repeat * 20):
        lu = sym.factor(m)
    res["lu_factor"] = (time.perf_counter() - t0) / (repeat * 20)

    b = rng.normal(size=500) + 1j * rng.normal(size=500)
    t0 = time.perf_counter()
    for _ in range(repeat * 200):
        lu.solve(b)
    res["lu_solve"] = (time.perf_counter() - t0) / (repeat * 200)

    case = load_bundled("ieee39")
    pf = solve_power_flow(case)
    fault = FaultEvent(branch=case.find_branch(16, 17), location=0.5,
                       t_on=0.1, t_clear=0.2)
    simulate(case, pf, fault, SimulationConfig(horizon=1.0))  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        simulate(case, pf, fault, SimulationConfig(horizon=10.0))
    res["simulation_10s"] = (time.perf_counter() - t0) / repeat

    t0 = time.perf_counter()
    for _ in range(repeat * 5):
        solve_power_flow(case)
    res["powerflow"] = (time.perf_counter() - t0) / (repeat * 5)

    print(json.dumps(res))

main(int(__import__("sys").argv[1]))
"""


def run_backend(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["SWINGBUS_PURE"] = "1" if pure else "0"
    out = subprocess.run([sys.executable, "-c", _CHILD, str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    compiled = run_backend(pure=False, repeat=args.repeat)
    pure = run_backend(pure=True, repeat=args.repeat)
    if compiled["backend"] == pure["backend"]:
        print("note: compiled extension unavailable; both runs are pure Python")

    width = max(len(w) for w in WORKLOADS)
    print(f"{'workload':<{width}}  {'compiled':>12}  {'pure-python':>12}  {'ratio':>7}")
    for w in WORKLOADS:
        c, p = compiled[w], pure[w]
        print(f"{w:<{width}}  {c * 1e3:>10.3f}ms  {p * 1e3:>10.3f}ms  "
              f"{p / c:>6.1f}x")


if __name__ == "__main__":
    main()
