"""Conditional prediction, held-out ranking and the faceted report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import mackay_probability, pair_moments
from .errors import ContractViolation
from .model import PairCounts

__all__ = [
    "user_moments",
    "score",
    "scores_for_user",
    "predict_conditional",
    "model_scorer",
    "popularity_scorer",
    "heldout_split",
    "heldout_rank",
    "UserResult",
    "Facet",
    "EvalReport",
    "activity_bucket",
    "build_report",
    "evaluate_ranks",
    "write_report",
]


def user_moments(i, state):
    """E[a_ij] and Var[a_ij] of user i against every item."""
    mean, second = pair_moments(
        state.user_mu[i][None, :], 1.0 / state.user_prec[i][None, :],
        state.user_bias[i], 1.0 / state.user_bias_prec[i],
        state.item_mu, 1.0 / state.item_prec, state.item_bias, 1.0 / state.item_bias_prec)
    return mean, np.maximum(second - mean * mean, 0.0)


def scores_for_user(i, state):
    """sigma(x_ij) E_q[psi_j] for every item j."""
    mean, var = user_moments(i, state)
    return mackay_probability(mean, var) * (state.beta / state.beta.sum())


def score(i, j, state) -> float:
    return float(scores_for_user(i, state)[j])


def predict_conditional(i, state):
    f = scores_for_user(i, state)
    return f / f.sum()


def model_scorer(state):
    return lambda i: scores_for_user(i, state)


def popularity_scorer(counts: PairCounts):
    c_j = counts.c_j.astype(float)
    return lambda i: c_j


def heldout_split(counts: PairCounts, seed=0):
    """Hold out one item per user, chosen uniformly over that user's occurrences.

    The chosen pair is removed entirely from the training counts so the
    held-out item is never among the user's training items.
    """
    rng = np.random.default_rng(seed)
    keep = np.ones(counts.nnz, dtype=bool)
    heldout = {}
    for i in range(counts.I):
        a, b = counts.row_ptr[i], counts.row_ptr[i + 1]
        if a == b:
            continue
        cum = np.cumsum(counts.vals[a:b])
        k = rng.integers(cum[-1])
        e = a + int(np.searchsorted(cum, k, side="right"))
        keep[e] = False
        heldout[i] = int(counts.cols[e])
    train = PairCounts.from_triples(counts.rows[keep], counts.cols[keep], counts.vals[keep],
                                    counts.I, counts.J)
    return train, heldout


def heldout_rank(i, j_star, scorer, train_counts: PairCounts) -> float:
    """Fraction of the user's unobserved items that j_star strictly out-scores."""
    a, b = train_counts.row_ptr[i], train_counts.row_ptr[i + 1]
    seen = train_counts.cols[a:b]
    if np.any(seen == j_star):
        raise ContractViolation(f"held-out item {j_star} is a training item of user {i}")
    f = np.asarray(scorer(i), dtype=float)
    cand = np.ones(train_counts.J, dtype=bool)
    cand[seen] = False
    return float(np.mean(f[j_star] > f[cand]))


@dataclass
class UserResult:
    user: int
    item: int
    rank: float
    activity: int
    sigma: float


@dataclass
class Facet:
    lo: int
    hi: int
    n: int
    mean_rank: float
    sigma_deciles: np.ndarray

    @property
    def label(self):
        return str(self.lo) if self.lo == self.hi else f"{self.lo}-{self.hi}"


@dataclass
class EvalReport:
    per_user: list
    facets: list = field(default_factory=list)

    @property
    def overall(self) -> float:
        return float(np.mean([r.rank for r in self.per_user])) if self.per_user else float("nan")

    def mean_sigma(self, lo=0, hi=np.inf):
        vals = [r.sigma for r in self.per_user if lo <= r.activity <= hi]
        return float(np.mean(vals)) if vals else float("nan")


def activity_bucket(c):
    """Logarithmic bucket (lo, hi) holding activity count c: 1, 2, 3-4, 5-8, ..."""
    c = int(c)
    if c <= 0:
        return (0, 0)
    if c == 1:
        return (1, 1)
    k = int(np.ceil(np.log2(c)))
    if 2 ** k < c:  # guard against log2 rounding
        k += 1
    return (2 ** (k - 1) + 1, 2 ** k)


def build_report(results) -> EvalReport:
    groups = {}
    for r in results:
        groups.setdefault(activity_bucket(r.activity), []).append(r)
    facets = []
    for (lo, hi), rs in sorted(groups.items()):
        sig = np.array([r.sigma for r in rs], dtype=float)
        deciles = (np.quantile(sig, np.linspace(0.1, 0.9, 9)) if np.all(np.isfinite(sig))
                   else np.full(9, np.nan))
        facets.append(Facet(lo, hi, len(rs), float(np.mean([r.rank for r in rs])), deciles))
    return EvalReport(list(results), facets)


def evaluate_ranks(heldout, scorer, train_counts, activity, state=None) -> EvalReport:
    """Rank every held-out item; sigma(x_ij*) is filled in when a model state is given."""
    results = []
    for i, j in sorted(heldout.items()):
        rank = heldout_rank(i, j, scorer, train_counts)
        if state is not None:
            mean, var = user_moments(i, state)
            sig = float(mackay_probability(mean[j], var[j]))
        else:
            sig = float("nan")
        results.append(UserResult(i, j, rank, int(activity[i]), sig))
    return build_report(results)


def write_report(reports, path_or_file):
    """TSV with an overall and a facet block for each named report."""
    lines = []
    for name, rep in reports.items():
        lines.append(f"# {name} overall")
        lines.append("n\tmean_rank\tmean_sigma")
        lines.append(f"{len(rep.per_user)}\t{rep.overall:.6f}\t{rep.mean_sigma():.6f}")
        lines.append(f"# {name} facets")
        lines.append("bucket\tn\tmean_rank\t" + "\t".join(f"sigma_d{k}" for k in range(1, 10)))
        for f in rep.facets:
            dec = "\t".join(f"{x:.6f}" for x in f.sigma_deciles)
            lines.append(f"{f.label}\t{f.n}\t{f.mean_rank:.6f}\t{dec}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as f:
            f.write(text)
    return text
