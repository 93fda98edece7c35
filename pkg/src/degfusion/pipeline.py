"""Iterative fusion loop: rank variables, assimilate the top one, gate
the prior update on information gain, and push the updated prior forward
into trajectory and remaining-useful-life distributions.

One iteration ranks variables by time-averaged HSIC on the current
design of experiments, freezes the others at their nominal values, runs
multi-chain MCMC on the marginalized posterior of the selected variable,
and measures the Kullback-Leibler gain of the posterior over the uniform
base on the variable's support. A gain at or above the threshold
replaces that marginal with a truncated-KDE posterior, moves the nominal
to the posterior median and schedules a DoE rebuild; a gain below it
terminates the loop.
"""

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DomainError, ExhaustedVariablesError
from .fusion import FusionProblem, log_posterior
from .hsic import rank_and_select
from .mcmc import gelman_rubin, posterior_sample, run_chains
from .models import DesignOfExperiments, build_doe, evaluate_model_batch
from .probability import Marginal, kl_vs_uniform, sample_dirichlet, sample_prior
from .surrogate import build_ensemble

DIRECT_COST_THRESHOLD_S = 0.010


@dataclass(frozen=True)
class PipelineSettings:
    """Everything the loop needs besides model, prior and data."""

    seed: int = 0
    doe_size: int = 1000
    epsilon: float = 0.1
    n_chains: int = 5
    chain_length: int = 10_000
    step_fraction: float = 0.1
    burn_in: float = 0.5
    thin: int = 1
    r_threshold: float = 1.05
    adapt_fraction: float = 0.0
    weight_samples: int = 100
    forward: str = "auto"            # auto | direct | ensemble
    ensemble_trends: tuple = ("constant", "linear", "quadratic")
    ensemble_kernels: tuple = ("matern12", "matern32", "matern52",
                               "squared-exponential")
    truncation_fraction: float = 0.99
    ensemble_centered: bool = True
    rul_threshold: float = None
    measure_all: bool = False
    max_iterations: int = None

    def validate(self, dim):
        if self.doe_size < 10:
            raise ConfigurationError("doe_size must be at least 10")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.n_chains < 2:
            raise ConfigurationError("need at least two chains")
        if self.chain_length < 100:
            raise ConfigurationError("chain_length must be at least 100")
        if not 0.0 < self.step_fraction <= 10.0:
            raise ConfigurationError("step_fraction must lie in (0, 10]")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigurationError("burn_in must lie in [0, 1)")
        if self.weight_samples < 1:
            raise ConfigurationError("weight_samples must be >= 1")
        if self.forward not in ("auto", "direct", "ensemble"):
            raise ConfigurationError("forward must be auto, direct or ensemble")
        cap = self.max_iterations if self.max_iterations is not None else dim
        if cap < 1 or cap > dim:
            raise ConfigurationError(f"iteration cap must lie in [1, {dim}]")
        return cap


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """Outcome of one select-assimilate-gate cycle."""

    iteration: int
    selected_index: int
    selected_name: str
    kl: float
    r_hat: float
    acceptance_rates: tuple
    updated: bool
    converged_chains: bool
    forward_mode: str
    posterior: np.ndarray
    hsic_averaged: np.ndarray


@dataclass(eq=False)
class PipelineState:
    """Mutable loop state threaded through the iterations."""

    prior: object
    nominal: np.ndarray
    iteration: int = 0
    doe: DesignOfExperiments = None
    history: list = field(default_factory=list)
    measured: set = field(default_factory=set)
    converged: bool = False

    @property
    def updated_indices(self):
        return {r.selected_index for r in self.history if r.updated}


@dataclass(frozen=True, eq=False)
class RulDistribution:
    """Monte Carlo estimate of the threshold-crossing time distribution."""

    threshold: float
    times: np.ndarray
    cdf: np.ndarray
    sample_size: int
    crossings: np.ndarray

    def median(self):
        """First time at which the crossing probability reaches one half."""
        idx = np.nonzero(self.cdf >= 0.5)[0]
        return float(self.times[idx[0]]) if idx.size else math.nan

    def variance(self):
        return float(np.var(self.crossings, ddof=1))


@dataclass(frozen=True, eq=False)
class FinalReport:
    """Everything a pipeline run produced."""

    initial_prior: object
    final_prior: object
    names: tuple
    history: tuple
    converged: bool
    cap_reached: bool
    nominal: np.ndarray
    trajectories_prior: np.ndarray
    trajectories_posterior: np.ndarray
    grid: object
    rul_prior: RulDistribution
    rul_posterior: RulDistribution
    t_present: float
    settings: PipelineSettings

    @property
    def posterior_samples(self):
        """Latest posterior sample per measured variable name."""
        out = {}
        for rec in self.history:
            out[rec.selected_name] = rec.posterior
        return out

    @property
    def final_kl(self):
        out = {}
        for rec in self.history:
            out[rec.selected_name] = rec.kl
        return out


def _iteration_seed(base, iteration, role):
    ss = np.random.SeedSequence(entropy=int(base) & 0xFFFFFFFF,
                                spawn_key=(int(iteration), role))
    return int(ss.generate_state(1)[0])


def _pick_forward_mode(settings, model, nominal):
    if settings.forward != "auto":
        return settings.forward
    start = time.perf_counter()
    model.evaluate(nominal)
    elapsed = time.perf_counter() - start
    return "direct" if elapsed < DIRECT_COST_THRESHOLD_S else "ensemble"


def merged_data_times(data):
    times = np.unique(np.concatenate([g.times for g in data]))
    if times.size == 0:
        raise ConfigurationError("data groups contain no observation times")
    return times


def run_iteration(model, state, data, settings, names=None):
    """One cycle of the loop; returns the advanced state and its record."""
    names = tuple(names) if names is not None else getattr(
        model, "names", tuple(f"x{j}" for j in range(state.prior.dim)))
    k = state.iteration
    if state.doe is None:
        state.doe = build_doe(model, state.prior, settings.doe_size,
                              _iteration_seed(settings.seed, k, 1))
    times = merged_data_times(data)

    exclude = state.measured if settings.measure_all else None
    report = rank_and_select(state.doe.inputs, state.doe.outputs, model.grid,
                             times, exclude=exclude, names=names)
    j = report.selected_index
    support = state.prior.support(j)

    mode = _pick_forward_mode(settings, model, state.nominal)
    if mode == "direct":
        problem = FusionProblem.direct(model, state.nominal, j, support, data)
    else:
        ensemble = build_ensemble(
            state.doe, times, trends=settings.ensemble_trends,
            kernels=settings.ensemble_kernels,
            truncation_fraction=settings.truncation_fraction,
            centered=settings.ensemble_centered)
        weights = sample_dirichlet(ensemble.size, settings.weight_samples,
                                   _iteration_seed(settings.seed, k, 2))
        problem = FusionProblem.with_ensemble(ensemble, state.nominal, j,
                                              support, data, weights)

    width = support[1] - support[0]
    inits = support[0] + (np.arange(settings.n_chains) + 0.5) / settings.n_chains * width
    chains = run_chains(lambda t: log_posterior(t, problem), support, inits,
                        [settings.step_fraction * width] * settings.n_chains,
                        settings.chain_length,
                        _iteration_seed(settings.seed, k, 3),
                        adapt_fraction=settings.adapt_fraction)
    conv = gelman_rubin(chains, settings.burn_in)
    converged_chains = conv.R < settings.r_threshold
    if not converged_chains:
        warnings.warn(
            f"iteration {k}: chains for {names[j]} have R={conv.R:.4f} "
            f">= {settings.r_threshold:g}; results retained"
        )
    theta = posterior_sample(chains, settings.burn_in, settings.thin)
    kl = kl_vs_uniform(theta, support)

    updated = kl >= settings.epsilon
    if updated:
        state.prior = state.prior.replace(
            j, Marginal.empirical_kde(theta, bounds=support))
        state.nominal = state.nominal.copy()
        state.nominal[j] = float(np.median(theta))
        state.doe = None
    else:
        state.converged = True

    record = IterationRecord(
        iteration=k, selected_index=j, selected_name=names[j], kl=float(kl),
        r_hat=float(conv.R),
        acceptance_rates=tuple(round(c.acceptance_rate, 6) for c in chains),
        updated=updated, converged_chains=converged_chains, forward_mode=mode,
        posterior=theta, hsic_averaged=report.averaged)
    state.history.append(record)
    state.measured.add(j)
    state.iteration += 1
    return state, record


def rul_cdf(trajectory_sample, grid, threshold, t_present):
    """Crossing-probability curve of a trajectory ensemble past the present.

    ``cdf(t)`` is the fraction of trajectories at or above the threshold
    at time t, evaluated on grid times after ``t_present``. The per-
    trajectory first crossing times (censored at the horizon) back the
    variance and median summaries.
    """
    Y = np.asarray(trajectory_sample, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ConfigurationError("trajectory sample must be a non-empty (N x n) matrix")
    if threshold < 0:
        raise ConfigurationError("threshold must be non-negative")
    pts = grid.points if hasattr(grid, "points") else np.asarray(grid, float)
    if not pts[0] <= t_present <= pts[-1]:
        raise DomainError(f"present time {t_present:g} outside the grid span")
    sel = pts > t_present
    times = pts[sel]
    cdf = (Y[sel] >= threshold).mean(axis=1)
    hit = Y >= threshold
    any_hit = hit.any(axis=0)
    first = np.where(any_hit, pts[np.argmax(hit, axis=0)], pts[-1])
    return RulDistribution(float(threshold), times, cdf, Y.shape[1], first)


def run_full_pipeline(model, prior, data, settings, names=None, nominal=None):
    """Iterate to convergence or the iteration cap and report everything."""
    names = tuple(names) if names is not None else getattr(
        model, "names", tuple(f"x{j}" for j in range(prior.dim)))
    cap = settings.validate(prior.dim)
    for j in range(prior.dim):
        lo, hi = prior.support(j)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ConfigurationError(
                f"variable {names[j]} has an unbounded support; the loop needs "
                "bounded marginals"
            )
    nominal = prior.midpoints() if nominal is None else np.asarray(nominal, float).copy()
    state = PipelineState(prior=prior, nominal=nominal)
    prior_doe = build_doe(model, prior, settings.doe_size,
                          _iteration_seed(settings.seed, 0, 1))

    if len(data) == 0:
        return _finalize(model, prior, state, prior_doe, data, settings, names,
                         converged=True, cap_reached=False)

    state.doe = prior_doe
    while state.iteration < cap:
        try:
            state, record = run_iteration(model, state, data, settings, names)
        except ExhaustedVariablesError:
            break
        if state.converged and not settings.measure_all:
            break
        if settings.measure_all and len(state.measured) >= prior.dim:
            break
    cap_reached = not state.converged and state.iteration >= cap
    return _finalize(model, prior, state, prior_doe, data, settings,
                     names, converged=state.converged, cap_reached=cap_reached)


def _finalize(model, initial_prior, state, prior_doe, data, settings, names,
              converged, cap_reached):
    posterior_inputs = sample_prior(state.prior, settings.doe_size,
                                    _iteration_seed(settings.seed, 9999, 4))
    posterior_outputs = evaluate_model_batch(model, posterior_inputs)
    t_present = max(float(g.times.max()) for g in data) if len(data) \
        else float(model.grid.points[0])
    rul_prior = rul_posterior = None
    if settings.rul_threshold is not None:
        rul_prior = rul_cdf(prior_doe.outputs, model.grid,
                            settings.rul_threshold, t_present)
        rul_posterior = rul_cdf(posterior_outputs, model.grid,
                                settings.rul_threshold, t_present)
    return FinalReport(
        initial_prior=initial_prior,
        final_prior=state.prior,
        names=names,
        history=tuple(state.history),
        converged=converged,
        cap_reached=cap_reached,
        nominal=state.nominal.copy(),
        trajectories_prior=prior_doe.outputs,
        trajectories_posterior=posterior_outputs,
        grid=model.grid,
        rul_prior=rul_prior,
        rul_posterior=rul_posterior,
        t_present=t_present,
        settings=settings,
    )


def segmented_assimilation(model, prior, data, settings, names=None):
    """Run the full loop independently on each between-reset segment.

    Observations are partitioned by the model's segment bounds; a segment
    with no data is skipped with a warning and reported as None.
    """
    from .models import DataGroup

    bounds = model.segment_bounds()
    reports = []
    for s, (lo, hi) in enumerate(bounds):
        last = s == len(bounds) - 1
        seg_groups = []
        for g in data:
            mask = (g.times >= lo) & ((g.times <= hi) if last else (g.times < hi))
            if mask.any():
                seg_groups.append(DataGroup(g.group_id, g.times[mask],
                                            g.values[mask], noise_sd=g.noise_sd))
        if not seg_groups:
            warnings.warn(f"segment {s}: no observations, skipping")
            reports.append(None)
            continue
        seg_settings = replace(settings, seed=settings.seed + 101 * s)
        reports.append(run_full_pipeline(model, prior, seg_groups, seg_settings,
                                         names=names))
    return reports
