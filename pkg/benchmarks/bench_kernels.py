"""Compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--vertices N] [--edges M] [--repeat R]

Prints the best-of-R wall time per kernel and backend, plus the speedup.
"""

import argparse
import time

import numpy as np

from mlembed import _pykernels
from mlembed.coarsen import hub_threshold, processing_order
from mlembed.community import WeightedGraph
from mlembed.graph import Graph

try:
    from mlembed import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(g, dim):
    src, dst = g.edges()
    perm = np.random.default_rng(0).permutation(len(src))
    order = processing_order(g, True)
    t = hub_threshold(g)
    wg = WeightedGraph.from_graph(g)
    k = wg.weighted_degrees()
    cmap = (np.arange(g.vertex_count) // 3).astype(np.int32)
    M0 = np.random.default_rng(1).uniform(-0.5 / dim, 0.5 / dim, (g.vertex_count, dim)).astype(np.float32)

    def novel(impl):
        out = np.empty(g.vertex_count, np.int32)
        impl.novel_sweep(g.offsets, g.neighbors, order, t, True, out, np.empty_like(out))

    def anti(impl):
        impl.anti_sweep(g.offsets, g.neighbors, 5, 8, np.empty(g.vertex_count, np.int32))

    def contract(impl):
        impl.contract(g.offsets, g.neighbors, cmap, int(cmap.max()) + 1, 1)

    def sgd(impl):
        M = M0.copy()
        impl.sgd_epoch(M, src, dst, perm, 0.035, 0.0035, 0, len(src), 3, 9, 1)

    def louvain(impl):
        comm = np.arange(g.vertex_count, dtype=np.int32)
        impl.louvain_sweep(wg.offsets, wg.neighbors, wg.weights, k, comm, k.copy(),
                           order, wg.total_weight)

    return {"novel_sweep": novel, "anti_sweep": anti, "contract": contract,
            "sgd_epoch": sgd, "louvain_sweep": louvain}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vertices", type=int, default=20_000)
    ap.add_argument("--edges", type=int, default=100_000)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.vertices
    g = Graph.from_edges(n, rng.integers(0, n, args.edges), rng.integers(0, n, args.edges))
    print(f"graph: {g.vertex_count} vertices, {g.edge_count} edges, d={args.dim}")
    if _ckernels is None:
        print("compiled extension not built; only the Python kernels are timed")
    print(f"{'kernel':<14}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, fn in cases(g, args.dim).items():
        py = best_of(lambda: fn(_pykernels), 1)
        if _ckernels is None:
            print(f"{name:<14}{'-':>12}{py:>12.3f}{'-':>10}")
            continue
        c = best_of(lambda: fn(_ckernels), args.repeat)
        print(f"{name:<14}{c:>12.4f}{py:>12.3f}{py / c:>10.1f}x")


if __name__ == "__main__":
    main()
