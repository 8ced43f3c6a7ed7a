"""Scalable variational Bayes for streams of (i, j) symbol pairs.

Pairs are selected by popularity and then censored by a logistic
preference on the energy u_i.v_j + b_i + b_j; the censored stream is
summarised by tied categorical factors so inference scales with the
number of observed pairs rather than with I x J.
"""

from .bounds import energy_moments, lambda_of, local_xi, log_logistic_bound, mackay_probability
from .caches import BackgroundCache, build_item_background, build_user_background
from .elbo import ElboBreakdown, compute_elbo
from .errors import (CheckpointError, ContractViolation, DegenerateMassError, PairSymError, ParseError,
                     SimulationError)
from .evaluate import (EvalReport, build_report, heldout_rank, heldout_split, popularity_scorer,
                       predict_conditional, score)
from .io import load_checkpoint, read_pair_stream, save_checkpoint
from .model import Hyperparams, ModelState, PairCounts, ingest_pairs, init_state
from .updates import (fit, sweep, update_categorical_s, update_categorical_t, update_dirichlet,
                      update_item_bias, update_item_traits, update_shared_xi, update_user_bias,
                      update_user_traits)

__version__ = "0.1.0"
