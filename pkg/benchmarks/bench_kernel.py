"""Compiled vs pure-Python Dormand-Prince kernel on quadratic problems.

Both backends take identical step sequences, so the comparison is time per
accepted step on the same workload.  Usage::

    python3 benchmarks/bench_kernel.py [--repeat 3] [--t-end-python 200]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from pdavd.dynamics import SolverParams
from pdavd.integrator import backend_name, integrate
from pdavd.problem import LinearMap, ProblemInstance, QuadraticObjective, random_qp


def _problems():
    qp2 = ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0]]), [1.0])
    return {"QP2 (n=2, m=1)": qp2, "random QP (n=20, m=5)": random_qp(0, a_scale=0.15)}


def _time(p, params, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = integrate(p, params, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, tr


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-end-python", type=float, default=200.0, help="horizon for both backends")
    args = ap.parse_args(argv)
    if backend_name() != "compiled":
        print("compiled extension not available; only the pure-Python kernel can be timed")
    print(f"{'problem':26s} {'steps':>9s} {'python us/step':>15s} {'compiled us/step':>17s} {'speedup':>8s} {'max diff':>9s}")
    for name, p in _problems().items():
        params = SolverParams(t_end=args.t_end_python, samples=50)
        tp, trp = _time(p, params, "python", args.repeat)
        steps = trp.stats["naccept"]
        if backend_name() == "compiled":
            tc, trc = _time(p, params, "compiled", args.repeat)
            diff = float(np.max(np.abs(trc.x - trp.x)))
            print(f"{name:26s} {steps:9d} {1e6 * tp / steps:15.3f} {1e6 * tc / steps:17.3f} {tp / tc:8.1f} {diff:9.1e}")
        else:
            print(f"{name:26s} {steps:9d} {1e6 * tp / steps:15.3f} {'-':>17s} {'-':>8s} {'-':>9s}")


if __name__ == "__main__":
    main()
