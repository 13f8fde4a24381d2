"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py --grid 48 --repeat 5
"""

import argparse

from qmx.bench import run_benchmark

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(run_benchmark(args.grid, args.repeat))
