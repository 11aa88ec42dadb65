"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each workload runs on both backends; outputs are checked for agreement
before timings are reported.
"""

import argparse
import time

import numpy as np

from saddlepoint import _pykernels

try:
    from saddlepoint import _kernels
except ImportError:
    _kernels = None

LAMBDA_MAX = 2


def workloads():
    rng = np.random.default_rng(7)
    A1 = np.array([[1.0]])
    w1 = np.array([1.0])
    A2 = rng.normal(size=(3, 2))
    w2 = rng.uniform(0.5, 1.5, 3)
    R = np.array([0.2, 0.3, 0.5])
    Theta = np.array([[1.0, -1.0], [1.0, 0.0], [1.0, 1.0]])
    xhat = Theta.T @ np.array([0.3, 0.3, 0.4])
    c = np.ones(3)
    rs = rng.normal(size=(5, 2))
    return [
        ("gauge d=1", lambda k: [k.ridge_gauge(0, LAMBDA_MAX, A1, w1, 0, np.array([s]), 1e-10)
                                 for s in np.linspace(-3, 3, 200)]),
        ("conjugate gauge d=1", lambda k: [k.ridge_conjugate_gauge(0, LAMBDA_MAX, A1, w1, 0,
                                                                   np.array([r]), 1e-10)
                                           for r in np.linspace(-2, 2, 20)]),
        ("support d=2", lambda k: [k.ridge_support(1, LAMBDA_MAX, A2, w2, 0, r, 1e-10)
                                   for r in rs]),
        ("grid oracle n=3", lambda k: k.grid_entropy_min(0, c, c, R, Theta, xhat, 2e-3, 4e-3,
                                                         np.full(3, 1.01))[0]),
    ]


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the Python backend is available")
    print(f"{'workload':<22}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, work in workloads():
        tp, op = timed(lambda: work(_pykernels), args.repeat)
        if _kernels is None:
            print(f"{name:<22}{tp:>12.4f}{'-':>12}{'-':>10}")
            continue
        tc, oc = timed(lambda: work(_kernels), args.repeat)
        if not np.allclose(np.asarray(op, float), np.asarray(oc, float), rtol=1e-9, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<22}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
