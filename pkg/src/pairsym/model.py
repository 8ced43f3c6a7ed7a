"""Counts, hyperparameters and the variational state of the paired-symbol model.

Per-entity factors are stored struct-of-arrays on :class:`ModelState`
(``user_mu[i]`` is the mean vector of q(u_i), and so on); the small
dataclasses below are the per-entity views returned by single-entity updates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ContractViolation, ParseError

__all__ = [
    "PairCounts",
    "IdMaps",
    "Hyperparams",
    "GaussianTraitFactor",
    "BiasFactor",
    "DirichletFactor",
    "TiedCategorical",
    "ModelState",
    "ingest_pairs",
    "init_state",
]


@dataclass(frozen=True, eq=False)
class PairCounts:
    """Sparse observed counts c_ij with both adjacency orders.

    Entries are stored sorted by (i, j). ``row_ptr`` indexes them per user;
    ``col_order`` permutes them into (j, i) order and ``col_ptr`` indexes that.
    """

    I: int
    J: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    row_ptr: np.ndarray = field(repr=False)
    col_order: np.ndarray = field(repr=False)
    col_ptr: np.ndarray = field(repr=False)

    @classmethod
    def from_triples(cls, rows, cols, vals, I, J):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.int64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ContractViolation("rows, cols and vals must have equal length")
        if np.any(vals < 1):
            raise ContractViolation("counts must be positive integers")
        if rows.size and (rows.min() < 0 or rows.max() >= I or cols.min() < 0 or cols.max() >= J):
            raise ContractViolation("index out of range")
        # aggregate duplicates
        key = rows * J + cols
        uniq, inv = np.unique(key, return_inverse=True)
        agg = np.zeros(uniq.size, dtype=np.int64)
        np.add.at(agg, inv, vals)
        r = uniq // J
        c = uniq % J
        row_ptr = np.concatenate(([0], np.cumsum(np.bincount(r, minlength=I))))
        col_order = np.lexsort((r, c))
        col_ptr = np.concatenate(([0], np.cumsum(np.bincount(c, minlength=J))))
        return cls(int(I), int(J), r, c, agg, row_ptr, col_order, col_ptr)

    @property
    def D(self) -> int:
        return int(self.vals.sum())

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def c_i(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals, minlength=self.I).astype(np.int64)

    @property
    def c_j(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.vals, minlength=self.J).astype(np.int64)

    def row_adj(self, i):
        """G(i) as a list of (j, c_ij)."""
        a, b = self.row_ptr[i], self.row_ptr[i + 1]
        return list(zip(self.cols[a:b].tolist(), self.vals[a:b].tolist()))

    def col_adj(self, j):
        """G(j) as a list of (i, c_ij)."""
        sel = self.col_order[self.col_ptr[j]:self.col_ptr[j + 1]]
        return list(zip(self.rows[sel].tolist(), self.vals[sel].tolist()))

    def count(self, i, j) -> int:
        a, b = self.row_ptr[i], self.row_ptr[i + 1]
        k = a + np.searchsorted(self.cols[a:b], j)
        if k < b and self.cols[k] == j:
            return int(self.vals[k])
        return 0

    def dense(self) -> np.ndarray:
        C = np.zeros((self.I, self.J), dtype=np.int64)
        C[self.rows, self.cols] = self.vals
        return C


@dataclass
class IdMaps:
    users: list
    items: list

    def __post_init__(self):
        self._u = {k: n for n, k in enumerate(self.users)}
        self._v = {k: n for n, k in enumerate(self.items)}

    def user_index(self, key):
        return self._u[key]

    def item_index(self, key):
        return self._v[key]


@dataclass
class Hyperparams:
    K: int = 20
    r: float = 1.0
    tau_u: float = 1.0
    tau_v: float = 1.0
    tau_b: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0
    sweeps: int = 30
    bulk_traits: bool = True
    fixed_energy_categorical: bool = False
    init_std: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.K) != self.K or self.K < 1:
            raise ContractViolation(f"K must be a positive integer, got {self.K}")
        if not self.r >= 0:
            raise ContractViolation(f"r must be >= 0, got {self.r}")
        for name in ("tau_u", "tau_v", "tau_b", "alpha0", "beta0"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"{name} must be > 0")
        if self.sweeps < 0:
            raise ContractViolation("sweeps must be >= 0")
        if self.init_std < 0:
            raise ContractViolation("init_std must be >= 0")

    def d_prime(self, D: int) -> int:
        return int(round(self.r * D))

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class GaussianTraitFactor:
    mu: np.ndarray
    prec: np.ndarray


@dataclass
class BiasFactor:
    mean: float
    prec: float


@dataclass
class DirichletFactor:
    alpha: np.ndarray

    def expected_log(self):
        from scipy.special import digamma

        return digamma(self.alpha) - digamma(self.alpha.sum())

    def mean(self):
        return self.alpha / self.alpha.sum()


@dataclass
class TiedCategorical:
    s: np.ndarray
    t: np.ndarray


@dataclass(eq=False)
class ModelState:
    counts: PairCounts
    hyper: Hyperparams
    d_prime: int
    user_mu: np.ndarray
    user_prec: np.ndarray
    item_mu: np.ndarray
    item_prec: np.ndarray
    user_bias: np.ndarray
    user_bias_prec: np.ndarray
    item_bias: np.ndarray
    item_bias_prec: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    s: np.ndarray
    t: np.ndarray
    xi_star: float = 1.0

    @property
    def I(self):
        return self.counts.I

    @property
    def J(self):
        return self.counts.J

    @property
    def K(self):
        return self.hyper.K

    def user_factor(self, i):
        return (GaussianTraitFactor(self.user_mu[i].copy(), self.user_prec[i].copy()),
                BiasFactor(float(self.user_bias[i]), float(self.user_bias_prec[i])))

    def item_factor(self, j):
        return (GaussianTraitFactor(self.item_mu[j].copy(), self.item_prec[j].copy()),
                BiasFactor(float(self.item_bias[j]), float(self.item_bias_prec[j])))

    @property
    def dir_pi(self):
        return DirichletFactor(self.alpha)

    @property
    def dir_psi(self):
        return DirichletFactor(self.beta)

    @property
    def cat(self):
        return TiedCategorical(self.s, self.t)

    def copy(self):
        kw = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            kw[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        kw["hyper"] = dataclasses.replace(self.hyper)
        return ModelState(**kw)

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if isinstance(getattr(self, f.name), np.ndarray)}

    def validate(self):
        I, J, K = self.I, self.J, self.K
        shapes = {
            "user_mu": (I, K), "user_prec": (I, K), "item_mu": (J, K), "item_prec": (J, K),
            "user_bias": (I,), "user_bias_prec": (I,), "item_bias": (J,), "item_bias_prec": (J,),
            "alpha": (I,), "beta": (J,), "s": (I,), "t": (J,),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ContractViolation(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in ("user_prec", "item_prec", "user_bias_prec", "item_bias_prec", "alpha", "beta"):
            if not np.all(getattr(self, name) > 0):
                raise ContractViolation(f"{name} must be positive")
        for name in ("s", "t"):
            w = getattr(self, name)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ContractViolation(f"{name} is not on the simplex")
        if not self.xi_star >= 0:
            raise ContractViolation("xi_star must be nonnegative")
        return self


def ingest_pairs(stream: Iterable) -> tuple[PairCounts, IdMaps]:
    """Aggregate (user, item[, count]) records into counts.

    Dense indices follow first appearance. Records may be tuples or raw text
    lines in the tab-separated pair-stream format.
    """
    users: dict = {}
    items: dict = {}
    rows, cols, vals = [], [], []
    for lineno, rec in enumerate(stream, 1):
        if isinstance(rec, str):
            line = rec.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rec = line.split("\t")
        if len(rec) not in (2, 3):
            raise ParseError(f"expected user<TAB>item[<TAB>count], got {len(rec)} fields", lineno)
        u, v = rec[0], rec[1]
        if u == "" or v == "":
            raise ParseError("empty user or item key", lineno)
        c = 1
        if len(rec) == 3:
            try:
                c = int(rec[2])
            except (TypeError, ValueError):
                raise ParseError(f"count {rec[2]!r} is not an integer", lineno) from None
            if c < 1:
                raise ParseError(f"count must be positive, got {c}", lineno)
        rows.append(users.setdefault(u, len(users)))
        cols.append(items.setdefault(v, len(items)))
        vals.append(c)
    if not rows:
        raise ParseError("no observations")
    counts = PairCounts.from_triples(rows, cols, vals, len(users), len(items))
    return counts, IdMaps(list(users), list(items))


def init_state(counts: PairCounts, hyper: Hyperparams, seed: int = 0) -> ModelState:
    hyper.validate()
    rng = np.random.default_rng(seed)
    I, J, K = counts.I, counts.J, hyper.K
    user_mu = rng.normal(0.0, hyper.init_std, size=(I, K))
    item_mu = rng.normal(0.0, hyper.init_std, size=(J, K))
    return ModelState(
        counts=counts,
        hyper=hyper,
        d_prime=hyper.d_prime(counts.D),
        user_mu=user_mu,
        user_prec=np.full((I, K), float(hyper.tau_u)),
        item_mu=item_mu,
        item_prec=np.full((J, K), float(hyper.tau_v)),
        user_bias=np.zeros(I),
        user_bias_prec=np.full(I, float(hyper.tau_b)),
        item_bias=np.zeros(J),
        item_bias_prec=np.full(J, float(hyper.tau_b)),
        alpha=np.full(I, float(hyper.alpha0)),
        beta=np.full(J, float(hyper.beta0)),
        s=np.full(I, 1.0 / I),
        t=np.full(J, 1.0 / J),
        xi_star=1.0,
    )
