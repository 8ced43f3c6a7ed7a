import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit, log_expit, logsumexp

from conftest import random_state
from pairsym.elbo import compute_elbo
from pairsym.model import Hyperparams, PairCounts, init_state
from pairsym.oracle import naive_elbo
from pairsym.updates import fit


def test_zero_data_is_zero():
    counts = PairCounts.from_triples([], [], [], 3, 2)
    s = init_state(counts, Hyperparams(K=2, tau_u=3.0, init_std=0.0), 0)
    e = compute_elbo(s)
    assert e.total == pytest.approx(0.0, abs=1e-12)
    assert naive_elbo(s) == pytest.approx(0.0, abs=1e-12)


def test_parts_sum_to_total(rng):
    e = compute_elbo(random_state(rng, 5, 4, 2))
    parts = e.observed_lik + e.censored_lik + e.categorical_cross + e.prior_terms + e.entropy_terms
    assert e.total == parts


@given(st.integers(0, 2**31), st.integers(2, 12), st.integers(2, 12), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_naive_agreement(seed, I, J, K):
    s = random_state(np.random.default_rng(seed), I, J, K)
    assert compute_elbo(s).total == pytest.approx(naive_elbo(s), rel=1e-9)


def test_single_pair_by_hand():
    # I = J = 1, K = 1, c_11 = 1, D' = 1: everything written out long-hand
    counts = PairCounts.from_triples([0], [0], [1], 1, 1)
    s = init_state(counts, Hyperparams(K=1), 0)
    s.user_mu[:] = 0.3
    s.item_mu[:] = -0.8
    s.user_prec[:] = 2.0
    s.item_prec[:] = 0.5
    s.user_bias[:] = 0.1
    s.item_bias[:] = 0.4
    s.xi_star = 0.7
    mu, su2, mv, sv2 = 0.3, 0.5, -0.8, 2.0
    Ea = mu * mv + 0.5
    Ea2 = (mu * mu + su2) * (mv * mv + sv2) + 2 * mu * mv * 0.5 + (0.01 + 1) + (0.16 + 1) + 2 * 0.1 * 0.4
    xi = np.sqrt(Ea2)
    lam = np.tanh(xi / 2) / (4 * xi)
    # the only pair is observed, so the censored term also uses xi_11
    obs = np.log(expit(xi)) - xi / 2 + Ea / 2
    cens = np.log(expit(xi)) - xi / 2 - Ea / 2
    quad = -lam * (Ea2 - xi * xi)  # zero at the optimum
    gauss_prior = sum(-0.5 * np.log(2 * np.pi) - 0.5 * (m * m + v) for m, v in
                      ((mu, su2), (mv, sv2), (0.1, 1.0), (0.4, 1.0)))
    gauss_ent = sum(0.5 * np.log(2 * np.pi * np.e * v) for v in (su2, sv2, 1.0, 1.0))
    want = obs + cens + 2 * quad + gauss_prior + gauss_ent  # single-point Dirichlets contribute 0
    assert compute_elbo(s).total == pytest.approx(want, rel=1e-12)


def _log_evidence_mc(counts, d_prime, n, rng):
    """log p(data) for I = J = 2, K = 1 with all hyperparameters one, by prior sampling."""
    C = counts.dense()
    pi1 = rng.random(n)  # Dir(1, 1) is uniform on the segment
    psi1 = rng.random(n)
    pi = np.stack([pi1, 1 - pi1], 1)
    psi = np.stack([psi1, 1 - psi1], 1)
    u, v = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
    bu, bv = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
    a = u[:, :, None] * v[:, None, :] + bu[:, :, None] + bv[:, None, :]
    sel = pi[:, :, None] * psi[:, None, :]
    logw = np.sum(C * (np.log(sel) + log_expit(a)), axis=(1, 2))
    logw += d_prime * np.log(np.sum(sel * expit(-a), axis=(1, 2)))
    lz = logsumexp(logw) - np.log(n)
    w = np.exp(logw - logw.max())
    se = w.std() / (w.mean() * np.sqrt(n))
    return lz, se


def test_elbo_below_log_evidence():
    counts = PairCounts.from_triples([0, 1], [0, 1], [2, 1], 2, 2)
    s = init_state(counts, Hyperparams(K=1, init_std=0.5), 1)
    fit(s, sweeps=300)
    lz, se = _log_evidence_mc(counts, s.d_prime, 2_000_000, np.random.default_rng(0))
    elbo = compute_elbo(s).total
    assert elbo <= lz + 4 * se
    assert lz - elbo < 3.0  # the bound is not vacuous
