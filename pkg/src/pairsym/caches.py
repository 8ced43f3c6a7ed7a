"""Item- and user-background caches.

Each cache rolls the expected statistics of one side, weighted by that
side's tied categorical vector, into five quantities so that no update
ever has to sum over unobserved pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BackgroundCache", "build_background", "build_item_background", "build_user_background"]

BLOCK = 4096


@dataclass(frozen=True)
class BackgroundCache:
    P: np.ndarray          # sum_n w_n E[x_n x_n^T]
    m_dagger: np.ndarray   # sum_n w_n E[b_n] E[x_n]
    m_ddagger: np.ndarray  # sum_n w_n E[x_n]
    nu: float              # sum_n w_n E[b_n]
    kappa: float           # sum_n w_n E[b_n^2]
    side: str


def _partial(mu, var, bias, bias_var, w):
    wmu = mu * w[:, None]
    P = np.einsum("nk,nl->kl", wmu, mu)
    P[np.diag_indices_from(P)] += np.einsum("n,nk->k", w, var)
    return (P, np.einsum("n,nk->k", w * bias, mu), wmu.sum(axis=0),
            float(np.dot(w, bias)), float(np.dot(w, bias * bias + bias_var)))


def build_background(mu, prec, bias, bias_prec, w, side, deterministic=True):
    var = 1.0 / prec
    bias_var = 1.0 / bias_prec
    if not deterministic:
        wmu = mu * w[:, None]
        P = wmu.T @ mu
        P = 0.5 * (P + P.T) + np.diag(w @ var)
        return BackgroundCache(P, (w * bias) @ mu, wmu.sum(axis=0), float(w @ bias),
                               float(w @ (bias * bias + bias_var)), side)
    K = mu.shape[1]
    P = np.zeros((K, K))
    md = np.zeros(K)
    mdd = np.zeros(K)
    nu = kappa = 0.0
    # fixed-size blocks combined in ascending order: bit-reproducible
    for a in range(0, mu.shape[0], BLOCK):
        sl = slice(a, a + BLOCK)
        p, d, dd, n, k = _partial(mu[sl], var[sl], bias[sl], bias_var[sl], w[sl])
        P += p
        md += d
        mdd += dd
        nu += n
        kappa += k
    return BackgroundCache(0.5 * (P + P.T), md, mdd, nu, kappa, side)


def build_item_background(state, deterministic=True) -> BackgroundCache:
    return build_background(state.item_mu, state.item_prec, state.item_bias, state.item_bias_prec,
                            state.t, "item", deterministic)


def build_user_background(state, deterministic=True) -> BackgroundCache:
    return build_background(state.user_mu, state.user_prec, state.user_bias, state.user_bias_prec,
                            state.s, "user", deterministic)
