import numpy as np
import pytest

from pairsym.model import Hyperparams, ModelState, PairCounts


def random_counts(rng, I, J, density=0.3, max_count=4):
    mask = rng.random((I, J)) < density
    mask[0, 0] = True  # never empty
    i, j = np.nonzero(mask)
    return PairCounts.from_triples(i, j, rng.integers(1, max_count + 1, size=i.size), I, J)


def random_state(rng, I, J, K, density=0.3, r=None, **hyper_kw):
    """A state with every factor drawn at random, far from any fixed point."""
    counts = random_counts(rng, I, J, density)
    hyper = Hyperparams(K=K, r=rng.uniform(0.3, 3.0) if r is None else r,
                        tau_u=rng.uniform(0.5, 2.0), tau_v=rng.uniform(0.5, 2.0),
                        tau_b=rng.uniform(0.5, 2.0), alpha0=rng.uniform(0.5, 2.0),
                        beta0=rng.uniform(0.5, 2.0), **hyper_kw)
    return ModelState(
        counts=counts, hyper=hyper, d_prime=hyper.d_prime(counts.D),
        user_mu=rng.normal(0, 0.7, (I, K)), user_prec=rng.uniform(0.5, 4.0, (I, K)),
        item_mu=rng.normal(0, 0.7, (J, K)), item_prec=rng.uniform(0.5, 4.0, (J, K)),
        user_bias=rng.normal(0, 0.5, I), user_bias_prec=rng.uniform(0.5, 4.0, I),
        item_bias=rng.normal(0, 0.5, J), item_bias_prec=rng.uniform(0.5, 4.0, J),
        alpha=rng.uniform(0.5, 5.0, I), beta=rng.uniform(0.5, 5.0, J),
        s=rng.dirichlet(np.ones(I)), t=rng.dirichlet(np.ones(J)),
        xi_star=rng.uniform(0.2, 3.0))


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = [v for key in ("passed", "failed") for rep in terminalreporter.stats.get(key, [])
             for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
