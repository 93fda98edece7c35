"""Random-walk Metropolis-Hastings on a bounded scalar target, with
multi-chain orchestration and the Gelman-Rubin convergence diagnostic.

The proposal is a symmetric uniform step centered at the current state,
so the acceptance probability reduces to ``min(1, exp(delta log-post))``.
Proposals outside the support are rejected outright, which is equivalent
to a -inf target there. Everything is deterministic given seeds.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateSampleError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Chain:
    """One realized chain: states, target values and acceptance record."""

    states: np.ndarray
    log_posts: np.ndarray
    accept_flags: np.ndarray
    accepted: int
    step_size: float
    seed: int

    @property
    def length(self):
        return self.states.size

    @property
    def acceptance_rate(self):
        return self.accepted / max(self.length - 1, 1)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Between/within-chain variance ratio diagnostic."""

    R: float
    per_chain_means: np.ndarray
    B: float
    W: float
    n_used: int


def rwmh_chain(log_post, init, support, step_size, length, seed,
               adapt_fraction=0.0, target_acceptance=0.35):
    """Run one random-walk chain of the given length.

    ``adapt_fraction`` > 0 turns on Robbins-Monro step-size tuning toward
    the target acceptance rate over that initial fraction of the chain;
    the step freezes afterwards so the invariant distribution is exact
    for the sampled tail. A +inf target value (exact-fit degeneracy)
    rejects the proposal with a warning.
    """
    lo, hi = float(support[0]), float(support[1])
    init = float(init)
    if length < 100:
        raise ConfigurationError("chain length must be at least 100")
    if not lo <= init <= hi:
        raise ConfigurationError(f"init {init:g} outside support [{lo:g}, {hi:g}]")
    lp = float(log_post(init))
    if not math.isfinite(lp):
        raise ConfigurationError(f"log-posterior at init {init:g} is not finite")
    step = float(step_size)
    if step <= 0:
        raise ConfigurationError("step size must be positive")

    rng = np.random.default_rng(seed)
    states = np.empty(length)
    log_posts = np.empty(length)
    accept_flags = np.zeros(length, dtype=bool)
    states[0] = init
    log_posts[0] = lp
    accepted = 0
    n_adapt = int(adapt_fraction * length)
    x = init
    for i in range(1, length):
        proposal = x + rng.uniform(-step, step)
        alpha = 0.0
        if lo <= proposal <= hi:
            lp_prop = float(log_post(proposal))
            if lp_prop == math.inf:
                log.warning("rejecting exact-fit proposal at %g", proposal)
            else:
                alpha = min(1.0, math.exp(min(lp_prop - lp, 0.0)))
                if rng.random() < alpha:
                    x = proposal
                    lp = lp_prop
                    accepted += 1
                    accept_flags[i] = True
        if i <= n_adapt:
            # Robbins-Monro drift of log(step) toward the target rate.
            step *= math.exp((alpha - target_acceptance) / i ** 0.6)
        states[i] = x
        log_posts[i] = lp
    return Chain(states, log_posts, accept_flags, accepted, step, int(seed))


def run_chains(log_post, support, inits, step_sizes, length, base_seed,
               adapt_fraction=0.0, parallel=False):
    """Independent chains with derived seeds ``base_seed + chain index``.

    Results are identical whether chains run sequentially or on a thread
    pool (the target must be safe for concurrent evaluation); per-chain
    failures carry the chain index.
    """
    inits = np.asarray(inits, dtype=float).ravel()
    step_sizes = np.asarray(step_sizes, dtype=float).ravel()
    n_chains = inits.size
    if n_chains < 2:
        raise ConfigurationError("need at least two chains")
    if step_sizes.size != n_chains:
        raise ShapeError("inits and step_sizes must have one entry per chain")
    if np.unique(inits).size != n_chains:
        raise ConfigurationError("chain inits must be distinct")

    def _one(i):
        try:
            return rwmh_chain(log_post, inits[i], support, step_sizes[i],
                              length, base_seed + i, adapt_fraction=adapt_fraction)
        except ConfigurationError as exc:
            raise ConfigurationError(f"chain {i}: {exc}") from exc

    if parallel:
        with ThreadPoolExecutor(max_workers=n_chains) as pool:
            return list(pool.map(_one, range(n_chains)))
    return [_one(i) for i in range(n_chains)]


def _post_burn(chains, burn_in_fraction):
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ConfigurationError("burn-in fraction must lie in [0, 1)")
    start = int(chains[0].length * burn_in_fraction)
    return [c.states[start:] for c in chains]


def gelman_rubin(chains, burn_in_fraction=0.5):
    """Variance-ratio convergence statistic over post-burn-in states.

    ``B`` is the scaled variance of the per-chain means, ``W`` the mean
    within-chain variance; the reported ratio tends to 1 from below as
    identical-distribution chains grow.
    """
    if len(chains) < 2:
        raise ConfigurationError("the diagnostic needs at least two chains")
    tails = _post_burn(chains, burn_in_fraction)
    n_used = tails[0].size
    if any(t.size != n_used for t in tails):
        raise ShapeError("chains must share a common length")
    if n_used < 10:
        raise ConfigurationError("need at least 10 post-burn-in states per chain")
    arr = np.vstack(tails)
    means = arr.mean(axis=1)
    W = float(arr.var(axis=1, ddof=1).mean())
    if W <= 0.0:
        raise DegenerateSampleError("within-chain variance is zero")
    grand = float(means.mean())
    B = n_used / (len(chains) - 1.0) * float(((means - grand) ** 2).sum())
    R = ((1.0 - 1.0 / n_used) * W + B / n_used) / W
    return ConvergenceReport(float(R), means, float(B), W, int(n_used))


def posterior_sample(chains, burn_in_fraction=0.5, thin=1, r_threshold=None):
    """Pooled, thinned post-burn-in states from all chains.

    When ``r_threshold`` is given the diagnostic is checked first and a
    violation warns without failing.
    """
    if thin < 1:
        raise ConfigurationError("thin must be >= 1")
    if r_threshold is not None:
        report = gelman_rubin(chains, burn_in_fraction)
        if report.R >= r_threshold:
            warnings.warn(
                f"chains may not have converged: R={report.R:.4f} >= {r_threshold:g}"
            )
    tails = _post_burn(chains, burn_in_fraction)
    pooled = np.concatenate([t[::thin] for t in tails])
    if pooled.size == 0:
        raise ConfigurationError("posterior pool is empty")
    return pooled
