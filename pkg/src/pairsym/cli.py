"""Command-line entry point: ``pairsym {train,evaluate,simulate,predict}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from .elbo import compute_elbo
from .errors import CheckpointError, ContractViolation, PairSymError
from .evaluate import evaluate_ranks, heldout_split, model_scorer, popularity_scorer, predict_conditional, write_report
from .io import (load_checkpoint, read_holdout, read_pair_stream, save_checkpoint, write_holdout,
                 write_pair_stream)
from .model import Hyperparams, init_state
from .oracle import BENCHMARK, random_truth, simulate, write_truth
from .updates import fit

log = logging.getLogger("pairsym")


def _add_model_flags(p):
    d = Hyperparams()
    p.add_argument("--k", type=int, default=d.K, help="latent dimensionality")
    p.add_argument("--ratio", type=float, default=d.r, help="censored-stream ratio r, D' = round(r D)")
    p.add_argument("--tau-u", type=float, default=d.tau_u)
    p.add_argument("--tau-v", type=float, default=d.tau_v)
    p.add_argument("--tau-b", type=float, default=d.tau_b)
    p.add_argument("--alpha0", type=float, default=d.alpha0)
    p.add_argument("--beta0", type=float, default=d.beta0)
    p.add_argument("--sweeps", type=int, default=d.sweeps)
    p.add_argument("--tol", type=float, default=None, help="stop when the relative ELBO change is below this")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", help="fixed reduction order everywhere")
    p.add_argument("--sequential-traits", action="store_true", help="per-dimension trait updates")
    p.add_argument("--fixed-energy-categorical", action="store_true",
                   help="zero-energy messages in the s/t updates")
    p.add_argument("--init-std", type=float, default=d.init_std)


def _hyper(args):
    return Hyperparams(K=args.k, r=args.ratio, tau_u=args.tau_u, tau_v=args.tau_v, tau_b=args.tau_b,
                       alpha0=args.alpha0, beta0=args.beta0, sweeps=args.sweeps,
                       bulk_traits=not args.sequential_traits,
                       fixed_energy_categorical=args.fixed_energy_categorical, init_std=args.init_std)


def _print_config(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config\t" + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _train(counts, args):
    state = init_state(counts, _hyper(args), seed=args.seed)

    def progress(n, elbo, timings):
        print(f"sweep\t{n + 1}\telbo\t{elbo:.10g}\tuser_phase_s\t{timings['user_phase']:.4f}"
              f"\titem_phase_s\t{timings['item_phase']:.4f}", file=sys.stderr)

    if args.sweeps == 0:
        print(f"sweep\t0\telbo\t{compute_elbo(state).total:.10g}", file=sys.stderr)
    fit(state, sweeps=args.sweeps, tol=args.tol, threads=args.threads,
        deterministic=args.deterministic, callback=progress)
    return state


def cmd_train(args):
    counts, ids = read_pair_stream(args.input)
    log.info("read %d pairs over %d users and %d items", counts.D, counts.I, counts.J)
    state = _train(counts, args)
    save_checkpoint(state, args.checkpoint, ids)


def cmd_evaluate(args):
    if args.input:
        counts, ids = read_pair_stream(args.input)
        train, heldout = heldout_split(counts, seed=args.holdout_seed)
        activity = counts.c_i
        if not heldout:
            raise ContractViolation("empty holdout")
        if args.write_holdout:
            write_holdout(heldout, ids, args.write_holdout,
                          removed={i: counts.count(i, j) for i, j in heldout.items()})
        t0 = time.perf_counter()
        state = _train(train, args)
        log.info("trained in %.2fs", time.perf_counter() - t0)
        if args.checkpoint:
            save_checkpoint(state, args.checkpoint, ids)
    else:
        if not (args.checkpoint and args.holdout):
            raise ContractViolation("evaluate needs --input, or --checkpoint with --holdout")
        state, ids = load_checkpoint(args.checkpoint)
        train = state.counts
        heldout = {}
        removed = {}
        for u, v, c in read_holdout(args.holdout):
            try:
                i, j = ids.user_index(u), ids.item_index(v)
            except KeyError as e:
                raise CheckpointError(f"holdout key {e} not present in checkpoint") from None
            heldout[i] = j
            removed[i] = c
        if not heldout:
            raise ContractViolation("empty holdout")
        activity = train.c_i.copy()
        for i, c in removed.items():
            activity[i] += c
    reports = {
        "model": evaluate_ranks(heldout, model_scorer(state), train, activity, state=state),
        "popularity": evaluate_ranks(heldout, popularity_scorer(train), train, activity),
    }
    text = write_report(reports, args.report if args.report else sys.stdout)
    if args.report:
        log.info("report written to %s", args.report)
    return text


def cmd_simulate(args):
    truth = random_truth(args.users, args.items, args.k, seed=args.seed, trait_scale=args.trait_scale,
                         user_bias=args.user_bias, item_bias=args.item_bias,
                         user_spread=args.user_spread, item_spread=args.item_spread)
    res = simulate(truth, args.observed, seed=args.seed + 1)
    write_pair_stream(res.pairs, args.output,
                      users=[f"u{i}" for i in range(args.users)], items=[f"v{j}" for j in range(args.items)])
    if args.truth:
        write_truth(truth, args.truth, res.accepted, res.rejected)
    print(f"accepted\t{res.accepted}\trejected\t{res.rejected}", file=sys.stderr)


def cmd_predict(args):
    state, ids = load_checkpoint(args.checkpoint)
    try:
        i = ids.user_index(args.user)
    except KeyError:
        raise ContractViolation(f"unknown user key {args.user!r}") from None
    p = predict_conditional(i, state)
    order = np.argsort(-p, kind="stable")[: args.top]
    for j in order:
        print(f"{ids.items[j]}\t{p[j]:.17g}")


def build_parser():
    parser = argparse.ArgumentParser(prog="pairsym", description="Variational paired-symbol model")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the model to a pair stream")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="held-out rank evaluation")
    p.add_argument("--input", help="pair stream to split, train on and evaluate")
    p.add_argument("--checkpoint", help="checkpoint to write (with --input) or to evaluate (with --holdout)")
    p.add_argument("--holdout", help="held-out user<TAB>item[<TAB>count] file")
    p.add_argument("--write-holdout", help="write the generated holdout here")
    p.add_argument("--holdout-seed", type=int, default=0)
    p.add_argument("--report", help="TSV report path (stdout if omitted)")
    _add_model_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="draw a synthetic pair stream")
    p.add_argument("--users", type=int, default=BENCHMARK["I"])
    p.add_argument("--items", type=int, default=BENCHMARK["J"])
    p.add_argument("--k", type=int, default=BENCHMARK["K"])
    p.add_argument("--observed", type=int, default=BENCHMARK["D"])
    p.add_argument("--seed", type=int, default=BENCHMARK["truth_seed"],
                   help="truth seed; the stream is drawn with seed + 1")
    p.add_argument("--trait-scale", type=float, default=BENCHMARK["trait_scale"])
    p.add_argument("--user-bias", type=float, default=0.0)
    p.add_argument("--item-bias", type=float, default=-1.0)
    p.add_argument("--user-spread", type=float, default=BENCHMARK["user_spread"],
                   help="log-scale sd of user selection weights")
    p.add_argument("--item-spread", type=float, default=BENCHMARK["item_spread"],
                   help="log-scale sd of item selection weights")
    p.add_argument("--output", required=True)
    p.add_argument("--truth", help="ground-truth JSON sidecar")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="top-N items for one user")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    _print_config(args)
    try:
        args.func(args)
    except (PairSymError, OSError) as e:
        print(f"error\t{type(e).__name__}\t{e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
