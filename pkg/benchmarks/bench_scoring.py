"""Time the compiled and numpy candidate-search kernels on the same inputs.

Usage: python benchmarks/bench_scoring.py [--K 200] [--L 24] [--pairs 3]
"""

import argparse
import time

import numpy as np

from d2orient import _scoring
from d2orient.commonlines import PairScorer
from d2orient.grid import build_candidate_tables
from d2orient.simulate import polar_fourier_stack, simulate_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--K", type=int, default=200)
    ap.add_argument("--L", type=int, default=24)
    ap.add_argument("--rays", type=int, default=360)
    ap.add_argument("--pairs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table = build_candidate_tables(args.K, args.L, args.rays)
    sim = simulate_dataset(args.pairs + 1, seed=args.seed)
    rays = polar_fourier_stack(sim.images, args.rays)
    print(f"K={args.K} L={args.L} rays={args.rays} candidates/pair={table.n_candidates:,}")

    backends = ["numpy"] + (["cython"] if _scoring._compiled is not None else [])
    results = {}
    for backend in backends:
        scorer = PairScorer(rays, table, backend=backend)
        t0 = time.perf_counter()
        picks = [scorer.estimate(0, j + 1).source for j in range(args.pairs)]
        dt = (time.perf_counter() - t0) / args.pairs
        results[backend] = (dt, picks)
        rate = table.n_candidates / dt / 1e6
        print(f"{backend:>7}: {dt * 1e3:9.1f} ms/pair  {rate:8.1f} M candidates/s")
    if len(results) == 2:
        same = results["numpy"][1] == results["cython"][1]
        print(f"speedup: {results['numpy'][0] / results['cython'][0]:.1f}x  identical picks: {same}")
    else:
        print("compiled kernel not built; only the numpy kernel was timed")


if __name__ == "__main__":
    np.seterr(all="ignore")
    main()
