"""Per-sweep wall time as cold items are added with D fixed.

Times are the best of a few sweeps after a warm-up sweep.
"""

import argparse
import time

import numpy as np

from pairsym.model import Hyperparams, PairCounts, init_state
from pairsym.updates import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--observed", type=int, default=100_000)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--base-items", type=int, default=500)
    ap.add_argument("--factors", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    i = rng.integers(0, args.users, args.observed)
    j = rng.integers(0, args.base_items, args.observed)
    ones = np.ones(args.observed, int)
    print("J\tsweep_s\tuser_phase_s\titem_phase_s")
    for f in args.factors:
        J = args.base_items * f
        state = init_state(PairCounts.from_triples(i, j, ones, args.users, J), Hyperparams(K=args.k), 0)
        sweep(state, threads=args.threads)
        best = None
        for _ in range(args.reps):
            timings = {}
            t0 = time.perf_counter()
            sweep(state, threads=args.threads, timings=timings)
            total = time.perf_counter() - t0
            if best is None or total < best[0]:
                best = (total, timings["user_phase"], timings["item_phase"])
        print(f"{J}\t{best[0]:.3f}\t{best[1]:.3f}\t{best[2]:.3f}")


if __name__ == "__main__":
    main()
