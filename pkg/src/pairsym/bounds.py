"""Logistic bound helpers and posterior moments of the pair energy.

The energy of a pair is a_ij = u_i.v_j + b_i + b_j. Under the fully
factorized posterior its first two moments are available in closed form,
and those moments are all the logistic bound and the Gaussian-averaged
sigmoid need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .errors import ContractViolation

__all__ = [
    "sigmoid",
    "log_sigmoid",
    "lambda_of",
    "log_logistic_bound",
    "EnergyMoments",
    "pair_moments",
    "energy_moments",
    "local_xi",
    "mackay_probability",
]

_SMALL_XI = 1e-6

sigmoid = expit
log_sigmoid = log_expit


def lambda_of(xi):
    """lambda(xi) = (sigmoid(xi) - 1/2) / (2 xi), even in xi, 1/8 at 0."""
    xi = np.abs(np.asarray(xi, dtype=float))
    small = xi < _SMALL_XI
    safe = np.where(small, 1.0, xi)
    # tanh form avoids the cancellation in sigmoid(xi) - 1/2
    out = np.where(small, 0.125 - xi * xi / 96.0, np.tanh(safe / 2.0) / (4.0 * safe))
    return out if out.ndim else float(out)


def log_logistic_bound(a, xi):
    """Log of the Jaakkola-Jordan lower bound on sigmoid(a), tight at |a| = |xi|."""
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    out = log_sigmoid(xi) - lambda_of(xi) * (a * a - xi * xi) + 0.5 * a - 0.5 * xi
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class EnergyMoments:
    mean: float
    second: float

    @property
    def variance(self):
        return max(self.second - self.mean * self.mean, 0.0)


def pair_moments(u_mu, u_var, ub, ub_var, v_mu, v_var, vb, vb_var):
    """Vectorised E[a] and E[a^2] for aligned rows of user and item factors.

    Trait arguments are (..., K) arrays, bias arguments (...,) arrays.
    """
    dot = np.einsum("...k,...k->...", u_mu, v_mu)
    mean = dot + ub + vb
    # E[(u.v)^2] = (mu_u.mu_v)^2 + sum_k (mu_u^2 var_v + var_u mu_v^2 + var_u var_v)
    cross = np.einsum("...k,...k->...", u_mu * u_mu, v_var) \
        + np.einsum("...k,...k->...", u_var, v_mu * v_mu + v_var)
    b = ub + vb
    second = dot * dot + cross + 2.0 * dot * b + b * b + ub_var + vb_var
    return mean, second


def energy_moments(i, j, state) -> EnergyMoments:
    mean, second = pair_moments(
        state.user_mu[i], 1.0 / state.user_prec[i], state.user_bias[i], 1.0 / state.user_bias_prec[i],
        state.item_mu[j], 1.0 / state.item_prec[j], state.item_bias[j], 1.0 / state.item_bias_prec[j],
    )
    return EnergyMoments(float(mean), float(second))


def local_xi(i, j, state) -> float:
    """Optimal bound parameter of an observed pair: the positive root of E[a_ij^2]."""
    return float(np.sqrt(max(energy_moments(i, j, state).second, 0.0)))


def mackay_probability(mean, variance):
    """sigmoid(mean / sqrt(1 + pi variance / 8)), the probit-matched Gaussian average."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ContractViolation("variance must be nonnegative")
    out = sigmoid(np.asarray(mean, dtype=float) / np.sqrt(1.0 + np.pi * variance / 8.0))
    return out if np.ndim(out) else float(out)
