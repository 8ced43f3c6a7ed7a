"""Coordinate-ascent updates and the sweep driver.

Every update splits its sum over all J (or I) partners into a background
cache term, evaluated as if every pair were censored with the shared bound
parameter xi*, plus a sparse correction over the observed partners G(i).
Updates for one side are written for a generic "own"/"other" view so the
user and item versions share one code path.

Note on the censored-pair weights: they are the tied categorical products
s_i t_j, which play the role the softmax weights w_ij play in the gradient
of a bilinear softmax log-likelihood. Setting D' = D matches the two
gradients term for term when the softmax is replaced by its factorized
substitute.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, softmax

from .bounds import lambda_of, log_sigmoid, pair_moments
from .caches import BackgroundCache, build_item_background, build_user_background
from .errors import ContractViolation, DegenerateMassError
from .model import BiasFactor, DirichletFactor, GaussianTraitFactor, ModelState

__all__ = [
    "TraitNaturalParams",
    "trait_natural_params",
    "bias_natural_params",
    "update_user_traits",
    "update_item_traits",
    "update_user_bias",
    "update_item_bias",
    "update_dirichlet",
    "expected_omega",
    "update_categorical_s",
    "update_categorical_t",
    "update_shared_xi",
    "sweep",
    "fit",
]

ENTRY_BLOCK = 4096
ENTITY_BLOCK = 2048


@dataclass
class TraitNaturalParams:
    P: np.ndarray  # precision matrix of the full-covariance intermediate Gaussian
    m: np.ndarray  # mean-times-precision

    @property
    def mean(self):
        return np.linalg.solve(self.P, self.m)


class _Side:
    """Arrays of one side ("own") and its partners ("other"), in own-major entry order."""

    def __init__(self, state: ModelState, name: str):
        c = state.counts
        h = state.hyper
        self.name = name
        if name == "user":
            self.mu, self.prec = state.user_mu, state.user_prec
            self.bias, self.bias_prec = state.user_bias, state.user_bias_prec
            self.omu, self.oprec = state.item_mu, state.item_prec
            self.obias, self.obias_prec = state.item_bias, state.item_bias_prec
            self.w, self.ow = state.s, state.t
            self.ptr, self.own, self.nbr, self.cnt = c.row_ptr, c.rows, c.cols, c.vals
            self.tau = h.tau_u
            self.conc, self.conc0, self.marg = state.alpha, h.alpha0, c.c_i
        elif name == "item":
            o = c.col_order
            self.mu, self.prec = state.item_mu, state.item_prec
            self.bias, self.bias_prec = state.item_bias, state.item_bias_prec
            self.omu, self.oprec = state.user_mu, state.user_prec
            self.obias, self.obias_prec = state.user_bias, state.user_bias_prec
            self.w, self.ow = state.t, state.s
            self.ptr, self.own, self.nbr, self.cnt = c.col_ptr, c.cols[o], c.rows[o], c.vals[o]
            self.tau = h.tau_v
            self.conc, self.conc0, self.marg = state.beta, h.beta0, c.c_j
        else:
            raise ValueError(f"unknown side {name!r}")
        self.cnt = self.cnt.astype(float)
        self.tau_b = h.tau_b
        self.d_prime = float(state.d_prime)
        self.xi_star = float(state.xi_star)
        self.lam_star = lambda_of(self.xi_star)
        self.N = self.mu.shape[0]

    def entries(self, a, b):
        """Moments, bound parameters and censored weights for entries a:b."""
        own, nbr = self.own[a:b], self.nbr[a:b]
        mean, second = pair_moments(
            self.mu[own], 1.0 / self.prec[own], self.bias[own], 1.0 / self.bias_prec[own],
            self.omu[nbr], 1.0 / self.oprec[nbr], self.obias[nbr], 1.0 / self.obias_prec[nbr])
        second = np.maximum(second, 0.0)
        xi = np.sqrt(second)
        lam = lambda_of(xi)
        st = self.w[own] * self.ow[nbr] * self.d_prime
        return own, nbr, mean, second, xi, lam, st


def _segment_sum(values, ptr):
    """Sum consecutive runs values[ptr[k]:ptr[k+1]]; empty runs give zeros."""
    out = np.zeros((len(ptr) - 1,) + values.shape[1:])
    nonempty = ptr[:-1] < ptr[1:]
    if nonempty.any():
        out[nonempty] = np.add.reduceat(values, ptr[:-1][nonempty], axis=0)
    return out


def _blocks(ptr, lo=0, hi=None):
    """Split entities lo:hi into ranges holding about ENTRY_BLOCK entries each."""
    hi = len(ptr) - 1 if hi is None else hi
    out = []
    start = lo
    while start < hi:
        target = ptr[start] + ENTRY_BLOCK
        stop = int(np.searchsorted(ptr, target, side="right")) - 1
        stop = max(stop, start + 1)
        stop = min(stop, start + ENTITY_BLOCK, hi)
        out.append((start, stop))
        start = stop
    return out


def _trait_params(sd: _Side, cache: BackgroundCache, lo, hi):
    a, b = int(sd.ptr[lo]), int(sd.ptr[hi])
    own, nbr, mean, second, xi, lam, st = sd.entries(a, b)
    dl = 2.0 * (lam - sd.lam_star)
    quad = sd.cnt[a:b] * 2.0 * lam + st * dl
    eb = sd.bias[own] + sd.obias[nbr]
    lin = sd.cnt[a:b] * (0.5 - 2.0 * lam * eb) - st * dl * eb
    local = sd.ptr[lo:hi + 1] - a
    omu = sd.omu[nbr]
    P = _segment_sum(np.einsum("e,ek,el->ekl", quad, omu, omu), local)
    diag = _segment_sum(quad[:, None] / sd.oprec[nbr], local) + sd.tau
    m = _segment_sum(lin[:, None] * omu, local)

    base = sd.w[lo:hi] * sd.d_prime
    ls = sd.lam_star
    P += (base * 2.0 * ls)[:, None, None] * cache.P
    k = np.arange(P.shape[-1])
    P[:, k, k] += diag
    m += base[:, None] * ((-0.5 - 2.0 * ls * sd.bias[lo:hi])[:, None] * cache.m_ddagger
                          - 2.0 * ls * cache.m_dagger)
    return P, m


def _bias_params(sd: _Side, cache: BackgroundCache, lo, hi):
    a, b = int(sd.ptr[lo]), int(sd.ptr[hi])
    own, nbr, mean, second, xi, lam, st = sd.entries(a, b)
    dl = 2.0 * (lam - sd.lam_star)
    x = mean - sd.bias[own]  # E[u.v + b_other]
    local = sd.ptr[lo:hi + 1] - a
    cnt = sd.cnt[a:b]
    base = sd.w[lo:hi] * sd.d_prime
    ls = sd.lam_star
    rho = 2.0 * ls * base + _segment_sum(cnt * 2.0 * lam + st * dl, local) + sd.tau_b
    nu = base * (-0.5 - 2.0 * ls * (cache.nu + sd.mu[lo:hi] @ cache.m_ddagger)) \
        + _segment_sum(cnt * (0.5 - 2.0 * lam * x) - st * dl * x, local)
    return nu, rho


def _solve_traits(P, m, mu_old, bulk):
    prec = np.diagonal(P, axis1=1, axis2=2).copy()
    if bulk:
        mu = np.linalg.solve(P, m[..., None])[..., 0]
    else:
        # one Gauss-Seidel pass: exact maximisation over each dimension in turn
        mu = mu_old.copy()
        for k in range(P.shape[-1]):
            r = m[:, k] - np.einsum("nl,nl->n", P[:, k, :], mu) + P[:, k, k] * mu[:, k]
            mu[:, k] = r / P[:, k, k]
    return mu, prec


def _check_cache(cache, side):
    if cache.side != side:
        raise ContractViolation(f"expected the {side}-background cache, got {cache.side}")


# -- per-entity public API ---------------------------------------------------

def trait_natural_params(n, state, cache, side="user") -> TraitNaturalParams:
    """Natural parameters of the full-covariance intermediate Gaussian for one entity."""
    _check_cache(cache, "item" if side == "user" else "user")
    P, m = _trait_params(_Side(state, side), cache, n, n + 1)
    return TraitNaturalParams(P[0], m[0])


def bias_natural_params(n, state, cache, side="user"):
    """(mean-times-precision, precision) of the bias update for one entity."""
    _check_cache(cache, "item" if side == "user" else "user")
    nu, rho = _bias_params(_Side(state, side), cache, n, n + 1)
    return float(nu[0]), float(rho[0])


def _update_traits(n, state, cache, side):
    nat = trait_natural_params(n, state, cache, side)
    mu_old = (state.user_mu if side == "user" else state.item_mu)[n]
    mu, prec = _solve_traits(nat.P[None], nat.m[None], mu_old[None], state.hyper.bulk_traits)
    return GaussianTraitFactor(mu[0], prec[0])


def update_user_traits(i, state, item_cache) -> GaussianTraitFactor:
    return _update_traits(i, state, item_cache, "user")


def update_item_traits(j, state, user_cache) -> GaussianTraitFactor:
    return _update_traits(j, state, user_cache, "item")


def update_user_bias(i, state, item_cache) -> BiasFactor:
    nu, rho = bias_natural_params(i, state, item_cache, "user")
    return BiasFactor(nu / rho, rho)


def update_item_bias(j, state, user_cache) -> BiasFactor:
    nu, rho = bias_natural_params(j, state, user_cache, "item")
    return BiasFactor(nu / rho, rho)


def update_dirichlet(state):
    D = float(state.d_prime)
    c = state.counts
    h = state.hyper
    return (DirichletFactor(h.alpha0 + c.c_i + state.s * D),
            DirichletFactor(h.beta0 + c.c_j + state.t * D))


def expected_omega(state, cache, side="user"):
    """sum over partners n' of w_n' Omega_nn' for every own entity n.

    Observed pairs use their own optimal bound parameter, everything else
    the shared xi*.
    """
    _check_cache(cache, "item" if side == "user" else "user")
    sd = _Side(state, side)
    var = 1.0 / sd.prec
    b = sd.bias
    full2 = (np.einsum("nk,kl,nl->n", sd.mu, cache.P, sd.mu) + var @ np.diag(cache.P)
             + 2.0 * b * (sd.mu @ cache.m_ddagger) + 2.0 * (sd.mu @ cache.m_dagger)
             + b * b + 1.0 / sd.bias_prec + 2.0 * b * cache.nu + cache.kappa)
    full1 = sd.mu @ cache.m_ddagger + b + cache.nu
    xs, ls = sd.xi_star, sd.lam_star
    lsx = log_sigmoid(xs)
    star = lsx + ls * xs * xs - 0.5 * xs - ls * full2 - 0.5 * full1
    own, nbr, mean, second, xi, lam, st = sd.entries(0, len(sd.own))
    diff = log_sigmoid(xi) - 0.5 * xi - lsx + ls * (second - xs * xs) + 0.5 * xs
    return star + _segment_sum(sd.ow[nbr] * diff, sd.ptr)


def _update_categorical(state, cache, side):
    sd = _Side(state, side)
    elog = digamma(sd.conc) - digamma(sd.conc.sum())
    if state.hyper.fixed_energy_categorical:
        # zero energy moments make the optimal bound parameter zero for every
        # pair, so every Omega is the same constant and drops out
        return softmax(elog)
    return softmax(elog + expected_omega(state, cache, side))


def update_categorical_s(state, item_cache):
    return _update_categorical(state, item_cache, "user")


def update_categorical_t(state, user_cache):
    return _update_categorical(state, user_cache, "item")


def update_shared_xi(state, user_cache, item_cache) -> float:
    _check_cache(user_cache, "user")
    _check_cache(item_cache, "item")
    u, v = user_cache, item_cache
    full = (np.sum(u.P * v.P) + 2.0 * u.m_ddagger @ v.m_dagger + 2.0 * u.m_dagger @ v.m_ddagger
            + 2.0 * u.nu * v.nu + u.kappa + v.kappa)
    sd = _Side(state, "user")
    own, nbr, mean, second, xi, lam, st = sd.entries(0, len(sd.own))
    wst = state.s[own] * state.t[nbr]
    Z = 1.0 - wst.sum()
    if Z <= 1e-12:
        raise DegenerateMassError(f"categorical mass outside the observed graph is {Z:.3g}")
    num = full - np.dot(wst, second)
    if num < 0:
        if num < -1e-10 * max(1.0, abs(full)):
            raise ArithmeticError(f"negative shared second moment {num:.3g}")
        num = 0.0
    return float(np.sqrt(num / Z))


# -- sweep ---------------------------------------------------------------

def _update_side(state, side, cache, threads=1):
    """Per-entity bias then trait updates for every entity on one side.

    Entities only read their own factors and the frozen other side, so the
    blocks are independent and their results do not depend on scheduling.
    """
    sd = _Side(state, side)
    bulk = state.hyper.bulk_traits

    def work(rng):
        lo, hi = rng
        nu, rho = _bias_params(sd, cache, lo, hi)
        sd.bias[lo:hi] = nu / rho
        sd.bias_prec[lo:hi] = rho
        P, m = _trait_params(sd, cache, lo, hi)
        mu, prec = _solve_traits(P, m, sd.mu[lo:hi], bulk)
        sd.mu[lo:hi] = mu
        sd.prec[lo:hi] = prec

    blocks = _blocks(sd.ptr)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, blocks))
    else:
        for rng in blocks:
            work(rng)


def sweep(state: ModelState, threads=1, deterministic=True, timings=None) -> ModelState:
    """One iteration of the paired-symbol coordinate ascent, in place."""
    clock = time.perf_counter
    t0 = clock()
    pi, psi = update_dirichlet(state)
    state.alpha, state.beta = pi.alpha, psi.alpha
    icache = build_item_background(state, deterministic)
    state.s = update_categorical_s(state, icache)
    _update_side(state, "user", icache, threads)
    t1 = clock()
    ucache = build_user_background(state, deterministic)
    state.xi_star = update_shared_xi(state, ucache, icache)
    state.t = update_categorical_t(state, ucache)
    _update_side(state, "item", ucache, threads)
    t2 = clock()
    if timings is not None:
        timings["user_phase"] = t1 - t0
        timings["item_phase"] = t2 - t1
    return state


def fit(state, sweeps=None, tol=None, threads=1, deterministic=True, callback=None):
    """Run sweeps until ``sweeps`` are done or the relative ELBO change drops below ``tol``.

    Returns the list of ELBO values after each sweep (empty when neither a
    tolerance nor a callback asks for them).
    """
    from .elbo import compute_elbo

    sweeps = state.hyper.sweeps if sweeps is None else sweeps
    history = []
    prev = None
    for n in range(sweeps):
        timings = {}
        sweep(state, threads=threads, deterministic=deterministic, timings=timings)
        if tol is None and callback is None:
            continue
        val = compute_elbo(state).total
        history.append(val)
        if callback is not None:
            callback(n, val, timings)
        if tol is not None and prev is not None and abs(val - prev) <= tol * abs(val):
            break
        prev = val
    return history
