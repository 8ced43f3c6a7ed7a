"""Held-out rank on the Netflix-prize 4-and-5-star stream.

Needs the prize's training_set directory (mv_*.txt files), which is not
bundled. Ranks are reported overall and per activity bucket.

    python3 scripts/netflix.py /data/netflix/training_set --k 20 --sweeps 30 --threads 8
"""

import argparse
import logging
import sys

from pairsym.evaluate import evaluate_ranks, heldout_split, model_scorer, popularity_scorer, write_report
from pairsym.io import read_netflix_stars, save_checkpoint
from pairsym.model import Hyperparams, ingest_pairs, init_state
from pairsym.updates import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("training_dir")
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--ratio", type=float, default=1.0)
    ap.add_argument("--sweeps", type=int, default=30)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--checkpoint")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    counts, ids = ingest_pairs(read_netflix_stars(args.training_dir))
    logging.info("D=%d over %d users and %d movies", counts.D, counts.I, counts.J)
    train, held = heldout_split(counts, seed=0)
    state = init_state(train, Hyperparams(K=args.k, r=args.ratio, sweeps=args.sweeps), seed=0)
    fit(state, threads=args.threads,
        callback=lambda n, e, t: logging.info("sweep %d elbo %.6g user %.1fs item %.1fs",
                                              n + 1, e, t["user_phase"], t["item_phase"]))
    if args.checkpoint:
        save_checkpoint(state, args.checkpoint, ids)
    write_report({"model": evaluate_ranks(held, model_scorer(state), train, counts.c_i, state=state),
                  "popularity": evaluate_ranks(held, popularity_scorer(train), train, counts.c_i)},
                 sys.stdout)


if __name__ == "__main__":
    main()
