"""Naive O(IJ) reference computations and a generative simulator.

Nothing here touches the caches or the sparse update paths: every quantity
is evaluated by summing explicitly over all I x J pairs, with observed pairs
at their optimal local bound parameter and all others at xi*. The naive
routines are meant for I*J up to about 1e6.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import digamma, expit, gammaln, log_expit, softmax

from .bounds import lambda_of
from .errors import ContractViolation, DegenerateMassError, SimulationError
from .updates import TraitNaturalParams

__all__ = [
    "GroundTruth",
    "random_truth",
    "BENCHMARK",
    "synthetic_benchmark",
    "SimulationResult",
    "simulate",
    "write_truth",
    "read_truth",
    "naive_moments",
    "naive_xi",
    "naive_trait_update",
    "naive_bias_update",
    "naive_categorical",
    "naive_shared_xi",
    "naive_elbo",
]

MAX_PAIRS = 10**6


@dataclass
class GroundTruth:
    U: np.ndarray
    V: np.ndarray
    b_user: np.ndarray
    b_item: np.ndarray
    pi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for name in ("pi", "psi"):
            w = getattr(self, name)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ContractViolation(f"{name} must lie on the simplex")

    def energy(self, i, j):
        return np.einsum("...k,...k->...", self.U[i], self.V[j]) + self.b_user[i] + self.b_item[j]


def random_truth(I, J, K, seed=0, trait_scale=1.0, user_bias=0.0, item_bias=-1.0,
                 bias_scale=0.5, user_spread=1.0, item_spread=1.0):
    """Draw a ground truth with log-normal selection popularities.

    ``user_spread`` and ``item_spread`` are the log-scale standard deviations
    of the user and item selection weights.
    """
    rng = np.random.default_rng(seed)
    U = rng.normal(0.0, trait_scale, size=(I, K))
    V = rng.normal(0.0, trait_scale, size=(J, K))
    bu = rng.normal(user_bias, bias_scale, size=I)
    bv = rng.normal(item_bias, bias_scale, size=J)
    pi = softmax(rng.normal(0.0, user_spread, size=I))
    psi = softmax(rng.normal(0.0, item_spread, size=J))
    return GroundTruth(U, V, bu, bv, pi, psi)


# Truth used by the recovery and r-sweep checks: a heavy-tailed user
# popularity gives both very light and very heavy users, while a mild item
# spread keeps the popularity baseline from explaining everything.
BENCHMARK = dict(I=200, J=100, K=2, D=20000, truth_seed=3, sim_seed=4,
                 trait_scale=1.5, user_spread=2.0, item_spread=0.5)


@dataclass
class SimulationResult:
    pairs: np.ndarray  # (accepted, 2) user and item indices in stream order
    accepted: int
    rejected: int


def simulate(truth: GroundTruth, target_observed: int, seed=0, batch=65536, max_draws=None):
    """Select pairs by popularity and censor them with sigmoid(energy).

    Stops at exactly ``target_observed`` accepted pairs; ``rejected`` is the
    number of censored draws made along the way.
    """
    if target_observed < 1:
        raise ContractViolation("target_observed must be >= 1")
    if max_draws is None:
        max_draws = 1000 * target_observed + 10**6
    rng = np.random.default_rng(seed)
    I, J = truth.pi.size, truth.psi.size
    chunks = []
    accepted = rejected = draws = 0
    while accepted < target_observed:
        if draws >= max_draws:
            raise SimulationError(
                f"only {accepted} of {target_observed} pairs accepted after {draws} draws")
        i = rng.choice(I, size=batch, p=truth.pi)
        j = rng.choice(J, size=batch, p=truth.psi)
        keep = rng.random(batch) < expit(truth.energy(i, j))
        need = target_observed - accepted
        hits = np.flatnonzero(keep)
        if hits.size >= need:
            last = hits[need - 1]
            keep[last + 1:] = False
            rejected += int(last + 1 - need)
            draws += int(last + 1)
        else:
            rejected += int(batch - hits.size)
            draws += batch
        accepted += int(min(hits.size, need))
        chunks.append(np.stack([i[keep], j[keep]], axis=1))
    return SimulationResult(np.concatenate(chunks), accepted, rejected)


def synthetic_benchmark(**overrides):
    """(truth, SimulationResult) for the pinned synthetic benchmark."""
    cfg = {**BENCHMARK, **overrides}
    truth = random_truth(cfg["I"], cfg["J"], cfg["K"], seed=cfg["truth_seed"],
                         trait_scale=cfg["trait_scale"], user_spread=cfg["user_spread"],
                         item_spread=cfg["item_spread"])
    return truth, simulate(truth, cfg["D"], seed=cfg["sim_seed"])


def write_truth(truth: GroundTruth, path, accepted=None, rejected=None):
    doc = {k: getattr(truth, k).tolist() for k in ("U", "V", "b_user", "b_item", "pi", "psi")}
    doc["accepted"] = accepted
    doc["rejected"] = rejected
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def read_truth(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    truth = GroundTruth(*(np.asarray(doc[k], dtype=float)
                          for k in ("U", "V", "b_user", "b_item", "pi", "psi")))
    return truth, doc.get("accepted"), doc.get("rejected")


# -- naive references ----------------------------------------------------

def _gate(state):
    if state.I * state.J > MAX_PAIRS:
        raise ContractViolation(f"naive oracle limited to I*J <= {MAX_PAIRS}")


def naive_moments(state):
    """Full I x J matrices of E[a_ij] and E[a_ij^2] via second-moment matrices."""
    _gate(state)
    Euu = np.einsum("ik,il->ikl", state.user_mu, state.user_mu) \
        + np.einsum("ik,kl->ikl", 1.0 / state.user_prec, np.eye(state.K))
    Evv = np.einsum("jk,jl->jkl", state.item_mu, state.item_mu) \
        + np.einsum("jk,kl->jkl", 1.0 / state.item_prec, np.eye(state.K))
    Euv2 = np.einsum("ikl,jkl->ij", Euu, Evv)  # tr(E[uu^T] E[vv^T])
    dot = state.user_mu @ state.item_mu.T
    bi = state.user_bias[:, None]
    bj = state.item_bias[None, :]
    Ebi2 = (state.user_bias ** 2 + 1.0 / state.user_bias_prec)[:, None]
    Ebj2 = (state.item_bias ** 2 + 1.0 / state.item_bias_prec)[None, :]
    mean = dot + bi + bj
    second = Euv2 + 2.0 * dot * (bi + bj) + Ebi2 + Ebj2 + 2.0 * bi * bj
    return mean, second


def naive_xi(state, second=None):
    if second is None:
        _, second = naive_moments(state)
    C = state.counts.dense()
    return np.where(C > 0, np.sqrt(np.maximum(second, 0.0)), state.xi_star)


def _oriented(state, side):
    """Arrays with rows indexing the side being updated."""
    mean, second = naive_moments(state)
    xi = naive_xi(state, second)
    C = state.counts.dense().astype(float)
    if side == "user":
        return dict(C=C, lam=lambda_of(xi), w=state.s, ow=state.t,
                    bias=state.user_bias, obias=state.item_bias, mu=state.user_mu,
                    omu=state.item_mu, ovar=1.0 / state.item_prec, tau=state.hyper.tau_u)
    return dict(C=C.T, lam=lambda_of(xi).T, w=state.t, ow=state.s,
                bias=state.item_bias, obias=state.user_bias, mu=state.item_mu,
                omu=state.user_mu, ovar=1.0 / state.user_prec, tau=state.hyper.tau_v)


def naive_trait_update(n, state, side="user") -> TraitNaturalParams:
    """Precision and mean-times-precision by explicit summation over every partner."""
    o = _oriented(state, side)
    Dp = float(state.d_prime)
    K = state.K
    P = o["tau"] * np.eye(K)
    m = np.zeros(K)
    for j in range(o["C"].shape[1]):
        cj = o["C"][n, j]
        wc = Dp * o["w"][n] * o["ow"][j]
        lam = o["lam"][n, j]
        Evv = np.outer(o["omu"][j], o["omu"][j]) + np.diag(o["ovar"][j])
        P += (cj + wc) * 2.0 * lam * Evv
        eb = o["bias"][n] + o["obias"][j]
        m += (cj * (0.5 - 2.0 * lam * eb) + wc * (-0.5 - 2.0 * lam * eb)) * o["omu"][j]
    return TraitNaturalParams(P, m)


def naive_bias_update(n, state, side="user"):
    """(mean-times-precision, precision) of q(b_n) by explicit summation."""
    o = _oriented(state, side)
    Dp = float(state.d_prime)
    nu = 0.0
    rho = state.hyper.tau_b
    for j in range(o["C"].shape[1]):
        cj = o["C"][n, j]
        wc = Dp * o["w"][n] * o["ow"][j]
        lam = o["lam"][n, j]
        x = float(o["mu"][n] @ o["omu"][j]) + o["obias"][j]
        rho += (cj + wc) * 2.0 * lam
        nu += cj * (0.5 - 2.0 * lam * x) + wc * (-0.5 - 2.0 * lam * x)
    return nu, rho


def naive_omega(state):
    """Expected bounded log(1 - sigmoid) for every pair."""
    mean, second = naive_moments(state)
    xi = naive_xi(state, second)
    lam = lambda_of(xi)
    return log_expit(xi) - lam * (second - xi * xi) - 0.5 * xi - 0.5 * mean


def naive_categorical(state):
    """Tied categorical vectors (s, t) from explicit Omega over all pairs."""
    if state.hyper.fixed_energy_categorical:
        Omega = np.zeros((state.I, state.J))
    else:
        Omega = naive_omega(state)
    elog_pi = digamma(state.alpha) - digamma(state.alpha.sum())
    elog_psi = digamma(state.beta) - digamma(state.beta.sum())
    ls = elog_pi + Omega @ state.t
    lt = elog_psi + state.s @ Omega
    s = np.exp(ls - ls.max())
    t = np.exp(lt - lt.max())
    return s / s.sum(), t / t.sum()


def naive_shared_xi(state):
    """Optimal xi*: the s_i t_j weighted mean of E[a^2] over unobserved pairs."""
    _, second = naive_moments(state)
    C = state.counts.dense()
    num = den = 0.0
    for i in range(state.I):
        for j in range(state.J):
            if C[i, j] == 0:
                w = state.s[i] * state.t[j]
                num += w * second[i, j]
                den += w
    if den <= 0.0:
        raise DegenerateMassError("no categorical mass outside the observed graph")
    return float(np.sqrt(max(num / den, 0.0)))


def naive_elbo(state):
    """Full bound with explicit terms for every pair, entropies via scipy.stats."""
    h = state.hyper
    Dp = float(state.d_prime)
    mean, second = naive_moments(state)
    xi = naive_xi(state, second)
    lam = lambda_of(xi)
    C = state.counts.dense().astype(float)
    common = log_expit(xi) - lam * (second - xi * xi) - 0.5 * xi
    total = float(np.sum(C * (common + 0.5 * mean)))
    total += float(np.sum(Dp * np.outer(state.s, state.t) * (common - 0.5 * mean)))

    elog_pi = digamma(state.alpha) - digamma(state.alpha.sum())
    elog_psi = digamma(state.beta) - digamma(state.beta.sum())
    total += float(np.sum((C.sum(1) + Dp * state.s) * elog_pi))
    total += float(np.sum((C.sum(0) + Dp * state.t) * elog_psi))

    for mu, prec, tau in ((state.user_mu, state.user_prec, h.tau_u),
                          (state.item_mu, state.item_prec, h.tau_v),
                          (state.user_bias, state.user_bias_prec, h.tau_b),
                          (state.item_bias, state.item_bias_prec, h.tau_b)):
        sd = 1.0 / np.sqrt(prec)
        # E_q[log N(x; 0, 1/tau)] = log N(mu; 0, 1/tau) - tau var / 2
        total += float(np.sum(stats.norm.logpdf(mu, 0.0, 1.0 / np.sqrt(tau)) - 0.5 * tau / prec))
        total += float(np.sum(stats.norm.entropy(mu, sd)))

    for conc, conc0, elog in ((state.alpha, h.alpha0, elog_pi), (state.beta, h.beta0, elog_psi)):
        n = conc.size
        total += float(gammaln(n * conc0) - n * gammaln(conc0) + (conc0 - 1.0) * elog.sum())
        total += float(stats.dirichlet.entropy(conc))

    for w in (state.s, state.t):
        pos = w[w > 0]
        total -= Dp * float(np.sum(pos * np.log(pos)))
    return total
