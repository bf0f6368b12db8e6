"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--shots N] [--repeat R]

Prints the best-of-R wall time per kernel and backend, and the speedup.
"""

import argparse
import time

import numpy as np

from optocollapse import _backend
from optocollapse import _kernels_py as py


def _cases(n):
    key = py.seed_key(1)
    cdf = np.linspace(0.0, 1.0, 4097)
    phis = np.tan(np.linspace(-1.4, 1.4, 4097)) * 0.01
    probs = np.exp(-25.0) * 25.0 ** np.arange(80) / np.cumprod(np.r_[1.0, np.arange(1.0, 80.0)])
    pcdf = np.cumsum(probs) / probs.sum()
    outs = [np.empty(n) for _ in range(4)]

    def normal(k):
        k.counter_normal(key, np.arange(n, dtype=np.uint64), 2)

    def phase(k):
        k.sample_phase(key, 0, n, py.PHASE_TABLE, 0.0, cdf, phis)

    def protocol(k):
        k.protocol_block(key, 0, n, 10.0, 0.5 * np.pi, 1.0, 0.1, 1.0, 0.1, 0.01,
                         py.PHASE_TABLE, 0.0, cdf, phis, *outs)

    def witness(k):
        k.witness_block(key, 0, n, 5.0, 0.1, 1.0, 0.5, 0.1, 0.01, pcdf, *outs)

    def displacement(k):
        k.branch_displacement_matrix(120, 0.1j, 0.3 - 0.2j, 0.05j)

    return {"counter_normal": normal, "sample_phase": phase, "protocol_block": protocol,
            "witness_block": witness, "branch_displacement(120)": displacement}


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _backend.available_backends()
    mods = {name: _backend.get_kernels(name) for name in names}
    print(f"shots per call: {args.shots}; backends: {', '.join(names)}")
    print(f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names) + "     speedup")
    for label, case in _cases(args.shots).items():
        times = {n: _best(lambda m=m: case(m), args.repeat) for n, m in mods.items()}
        row = f"{label:28s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if "cython" in times:
            row += f"  {times['python'] / times['cython']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
