"""Compare the compiled sweep kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--size 100] [--labels 12]``.
"""
import argparse
import time

import numpy as np

from mrfmap.dual_ascent import chain_counts, kernels, srmp_pass_weights
from mrfmap.harness.generators import grid_potts
from mrfmap.model import Reparametrization


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=100, help="grid side length")
    ap.add_argument("--labels", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    m = grid_potts(args.size, args.size, args.labels, seed=0)
    order = np.arange(m.node_count, dtype=np.int64)
    weights = srmp_pass_weights(m, order, chain_counts(m, order))
    print(f"grid {args.size}x{args.size}, {args.labels} labels, {m.edge_count} edges")

    results = {}
    for backend in ("python", "compiled"):
        try:
            k = kernels(backend)
        except ImportError:
            print(f"{backend:>9}: not available")
            continue
        phi = Reparametrization(m, np.zeros(m.packed.slot_off[-1]))
        sweep = best_of(lambda: k.node_sweep(m.packed, phi.values, order, weights), args.repeat)
        dual = best_of(lambda: k.dual_value(m.packed, phi.values), args.repeat)
        results[backend] = (sweep, dual, k.dual_value(m.packed, phi.values))
        print(f"{backend:>9}: node_sweep {sweep * 1e3:9.2f} ms   dual_value {dual * 1e3:8.2f} ms")

    if len(results) == 2:
        py, c = results["python"], results["compiled"]
        print(f"  speedup: node_sweep {py[0] / c[0]:.1f}x   dual_value {py[1] / c[1]:.1f}x")
        print(f"  dual after {args.repeat} sweeps: python {py[2]:.9f}, compiled {c[2]:.9f}")


if __name__ == "__main__":
    main()
