"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--nodes 9]
"""
import argparse
import sys
import timeit

import numpy as np

from setree import _kernels
from setree.generators import random_graph


def cases(n_partition: int, n_subsets: int, seed: int):
    rng = np.random.default_rng(seed)
    g = random_graph(n_partition, 0.5, rng)
    src, dst, w = g.edges()
    dense = random_graph(n_subsets, 0.5, rng).dense()
    labels = rng.integers(0, 3, size=n_partition)
    return {
        f"best_two_level_partition (N={n_partition})":
            lambda b: b.best_two_level_partition(n_partition, g.degrees, src, dst, w),
        f"subset_conductances (N={n_subsets})":
            lambda b: b.subset_conductances(dense),
        f"two_level_si x1000 (N={n_partition})":
            lambda b: [b.two_level_si(labels, 3, g.degrees, src, dst, w, g.total_volume) for _ in range(1000)],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--nodes", type=int, default=9, help="graph size for the partition search")
    ap.add_argument("--subset-nodes", type=int, default=14)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.compiled_backend is None:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    backends = {"cython": _kernels.compiled_backend, "python": _kernels.python_backend}
    print(f"{'kernel':<42}{'cython s':>10}{'python s':>10}{'speedup':>9}")
    for name, fn in cases(args.nodes, args.subset_nodes, args.seed).items():
        best = {k: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for k, b in backends.items()}
        print(f"{name:<42}{best['cython']:>10.4f}{best['python']:>10.4f}{best['python'] / best['cython']:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
