"""Pair streams, text checkpoints and the Netflix-prize loader."""

from __future__ import annotations

import glob
import os

import numpy as np

from .errors import CheckpointError, ParseError
from .model import Hyperparams, IdMaps, ModelState, PairCounts, ingest_pairs

__all__ = [
    "read_pair_stream",
    "write_pair_stream",
    "read_holdout",
    "write_holdout",
    "save_checkpoint",
    "load_checkpoint",
    "read_netflix_stars",
    "MAGIC",
    "VERSION",
]

MAGIC = "PSM-CKPT"
VERSION = 1


def read_pair_stream(path):
    with open(path, encoding="utf-8") as f:
        return ingest_pairs(f)


def write_pair_stream(pairs, path, users=None, items=None):
    """Write (i, j) index pairs as user<TAB>item lines, aggregating repeats into a count column."""
    pairs = np.asarray(pairs, dtype=np.int64)
    users = users if users is not None else [f"u{i}" for i in range(int(pairs[:, 0].max()) + 1)]
    items = items if items is not None else [f"v{j}" for j in range(int(pairs[:, 1].max()) + 1)]
    key, first, cnt = np.unique(pairs[:, 0] * (len(items)) + pairs[:, 1],
                                return_index=True, return_counts=True)
    order = np.argsort(first, kind="stable")  # keep first-appearance order
    with open(path, "w", encoding="utf-8") as f:
        for k in order:
            i, j = divmod(int(key[k]), len(items))
            c = int(cnt[k])
            f.write(f"{users[i]}\t{items[j]}\t{c}\n" if c > 1 else f"{users[i]}\t{items[j]}\n")


def read_holdout(path):
    """user<TAB>item[<TAB>count] lines into a list of (user, item, count)."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError("expected user<TAB>item[<TAB>count]", lineno)
            try:
                c = int(parts[2]) if len(parts) == 3 else 1
            except ValueError:
                raise ParseError(f"count {parts[2]!r} is not an integer", lineno) from None
            out.append((parts[0], parts[1], c))
    return out


def write_holdout(heldout, ids: IdMaps, path, removed=None):
    """One line per held-out user; ``removed`` maps user index to the number of occurrences taken out."""
    with open(path, "w", encoding="utf-8") as f:
        for i, j in sorted(heldout.items()):
            c = 1 if removed is None else removed[i]
            f.write(f"{ids.users[i]}\t{ids.items[j]}\t{c}\n")


# -- checkpoints -----------------------------------------------------------

def _g(x):
    return format(float(x), ".17g")


_HYPER_TYPES = {"K": int, "r": float, "tau_u": float, "tau_v": float, "tau_b": float,
                "alpha0": float, "beta0": float, "sweeps": int, "bulk_traits": bool,
                "fixed_energy_categorical": bool, "init_std": float}


def save_checkpoint(state: ModelState, path, ids: IdMaps | None = None):
    c = state.counts
    if ids is None:
        ids = IdMaps([str(i) for i in range(c.I)], [str(j) for j in range(c.J)])
    out = [f"{MAGIC} {VERSION}", f"I {c.I}", f"J {c.J}", f"K {state.K}", f"D {c.D}",
           f"Dprime {state.d_prime}", f"xi_star {_g(state.xi_star)}"]
    for name, typ in _HYPER_TYPES.items():
        v = getattr(state.hyper, name)
        out.append(f"hyper.{name} {int(v) if typ in (int, bool) else _g(v)}")

    def section(name, lines):
        out.append(f"[{name}] {len(lines)}")
        out.extend(lines)

    section("user_ids", list(ids.users))
    section("item_ids", list(ids.items))
    section("counts", [f"{i}\t{j}\t{v}" for i, j, v in zip(c.rows.tolist(), c.cols.tolist(), c.vals.tolist())])

    def factors(mu, prec, b, bp):
        return ["\t".join([_g(x) for x in mu[n]] + [_g(x) for x in prec[n]] + [_g(b[n]), _g(bp[n])])
                for n in range(mu.shape[0])]

    section("users", factors(state.user_mu, state.user_prec, state.user_bias, state.user_bias_prec))
    section("items", factors(state.item_mu, state.item_prec, state.item_bias, state.item_bias_prec))
    for name in ("alpha", "beta", "s", "t"):
        section(name, [_g(x) for x in getattr(state, name)])
    out.append("END")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(out) + "\n")


def load_checkpoint(path):
    """Returns (state, ids)."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    pos = 0

    def take(where):
        nonlocal pos
        if pos >= len(lines) or lines[pos] == "":
            raise CheckpointError(f"truncated checkpoint in {where}")
        pos += 1
        return lines[pos - 1]

    head = take("header").split()
    if len(head) != 2 or head[0] != MAGIC:
        raise CheckpointError("not a paired-symbol checkpoint")
    if head[1] != str(VERSION):
        raise CheckpointError(f"unsupported checkpoint version {head[1]} (expected {VERSION})")
    meta = {}
    for key in ("I", "J", "K", "D", "Dprime", "xi_star"):
        k, _, v = take("header").partition(" ")
        if k != key:
            raise CheckpointError(f"expected header field {key}, got {k!r}")
        meta[key] = v
    hyper_kw = {}
    for name, typ in _HYPER_TYPES.items():
        k, _, v = take("header").partition(" ")
        if k != f"hyper.{name}":
            raise CheckpointError(f"expected hyper.{name}, got {k!r}")
        hyper_kw[name] = bool(int(v)) if typ is bool else typ(v)
    I, J, K = int(meta["I"]), int(meta["J"]), int(meta["K"])

    current = "header"

    def section(name, expected=None):
        nonlocal current
        current = name
        hdr = take(f"section {name}")
        tag, _, n = hdr.partition(" ")
        if tag != f"[{name}]":
            raise CheckpointError(f"expected section [{name}], got {tag!r}")
        n = int(n)
        if expected is not None and n != expected:
            raise CheckpointError(f"section {name} has {n} records, expected {expected}")
        return [take(f"section {name}") for _ in range(n)]

    try:
        users = section("user_ids", I)
        items = section("item_ids", J)
        trip = np.array([[int(x) for x in ln.split("\t")] for ln in section("counts")],
                        dtype=np.int64).reshape(-1, 3)
        counts = PairCounts.from_triples(trip[:, 0], trip[:, 1], trip[:, 2], I, J)

        def factors(name, n):
            arr = np.array([[float(x) for x in ln.split("\t")] for ln in section(name, n)]).reshape(n, 2 * K + 2)
            return arr[:, :K].copy(), arr[:, K:2 * K].copy(), arr[:, 2 * K].copy(), arr[:, 2 * K + 1].copy()

        umu, uprec, ub, ubp = factors("users", I)
        vmu, vprec, vb, vbp = factors("items", J)
        vecs = {name: np.array([float(x) for x in section(name, n)])
                for name, n in (("alpha", I), ("beta", J), ("s", I), ("t", J))}
    except ValueError as e:
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint in section {current}: {e}") from None
    if take("trailer") != "END":
        raise CheckpointError("missing END marker")
    if counts.D != int(meta["D"]):
        raise CheckpointError("count total does not match header D")

    state = ModelState(
        counts=counts, hyper=Hyperparams(**hyper_kw), d_prime=int(meta["Dprime"]),
        user_mu=umu, user_prec=uprec, item_mu=vmu, item_prec=vprec,
        user_bias=ub, user_bias_prec=ubp, item_bias=vb, item_bias_prec=vbp,
        alpha=vecs["alpha"], beta=vecs["beta"], s=vecs["s"], t=vecs["t"],
        xi_star=float(meta["xi_star"]))
    return state, IdMaps(users, items)


# -- Netflix prize -------------------------------------------------------

def read_netflix_stars(training_dir, min_stars=4):
    """Yield (user, movie) key pairs for ratings >= min_stars from the mv_*.txt files."""
    files = sorted(glob.glob(os.path.join(training_dir, "mv_*.txt")))
    if not files:
        raise FileNotFoundError(f"no mv_*.txt files under {training_dir}")
    for path in files:
        with open(path, encoding="latin-1") as f:
            movie = f.readline().strip().rstrip(":")
            for lineno, line in enumerate(f, 2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) < 2:
                    raise ParseError(f"{os.path.basename(path)}: expected user,rating,date", lineno)
                if int(parts[1]) >= min_stars:
                    yield (parts[0], movie)
