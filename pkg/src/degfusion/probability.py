"""Distributions, seeded sampling, kernel density estimation and
Kullback-Leibler information-gain estimates.

Everything here is pure given an explicit seed or rng, so callers may fan
out work across threads as long as each supplies its own generator.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DegenerateSampleError, DomainError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

KINDS = ("uniform", "gaussian", "gamma", "empirical-kde")


def silverman_bandwidth(sample):
    """Rule-of-thumb KDE bandwidth 1.06 * sd * n**(-1/5)."""
    sample = np.asarray(sample, dtype=float)
    sd = sample.std(ddof=1)
    if sd <= 0.0 or not np.isfinite(sd):
        raise DegenerateSampleError("sample standard deviation is not positive")
    return 1.06 * sd * sample.size ** (-0.2)


class Marginal:
    """One independent scalar marginal distribution.

    Use the classmethod constructors; parameters are validated eagerly so
    invalid marginals never reach a sampler.
    """

    def __init__(self, kind, params, sample=None):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown marginal kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self.sample_points = sample
        self._validate()

    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", {"a": float(a), "b": float(b)})

    @classmethod
    def gaussian(cls, mean, var):
        return cls("gaussian", {"mean": float(mean), "var": float(var)})

    @classmethod
    def gamma(cls, shape, rate):
        return cls("gamma", {"shape": float(shape), "rate": float(rate)})

    @classmethod
    def empirical_kde(cls, sample, bounds, bandwidth=None):
        """Truncated-and-renormalized Gaussian KDE of a sample.

        The density is restricted to ``bounds`` and divided by the exact
        Gaussian-CDF mass inside them, so it integrates to one over the
        truncation interval up to floating-point error.
        """
        sample = np.asarray(sample, dtype=float).ravel()
        a, b = float(bounds[0]), float(bounds[1])
        if bandwidth is None:
            bandwidth = silverman_bandwidth(sample)
        params = {"a": a, "b": b, "bandwidth": float(bandwidth)}
        return cls("empirical-kde", params, sample=sample)

    def _validate(self):
        p = self.params
        if self.kind == "uniform":
            if not p["a"] < p["b"]:
                raise ConfigurationError(
                    f"uniform marginal needs a < b, got [{p['a']}, {p['b']}]"
                )
        elif self.kind == "gaussian":
            if not p["var"] > 0.0:
                raise ConfigurationError("gaussian marginal needs var > 0")
        elif self.kind == "gamma":
            if not (p["shape"] > 0.0 and p["rate"] > 0.0):
                raise ConfigurationError("gamma marginal needs shape > 0 and rate > 0")
        else:
            if self.sample_points is None or self.sample_points.size < 2:
                raise ConfigurationError("empirical-kde marginal needs >= 2 sample points")
            if not p["bandwidth"] > 0.0:
                raise ConfigurationError("empirical-kde bandwidth must be > 0")
            if not (np.isfinite(p["a"]) and np.isfinite(p["b"]) and p["a"] < p["b"]):
                raise ConfigurationError("empirical-kde truncation bounds must be finite with a < b")
            if self._kde_mass() <= 0.0:
                raise ConfigurationError("empirical-kde has no mass inside the truncation bounds")

    def _kde_mass(self):
        p = self.params
        h = p["bandwidth"]
        lo = ndtr((p["a"] - self.sample_points) / h)
        hi = ndtr((p["b"] - self.sample_points) / h)
        return float(np.mean(hi - lo))

    def support(self):
        """(lower, upper) of the distribution's support."""
        p = self.params
        if self.kind == "uniform" or self.kind == "empirical-kde":
            return p["a"], p["b"]
        if self.kind == "gaussian":
            return -math.inf, math.inf
        return 0.0, math.inf

    def draw(self, rng, n):
        """n independent draws using the supplied generator."""
        p = self.params
        if self.kind == "uniform":
            return rng.uniform(p["a"], p["b"], n)
        if self.kind == "gaussian":
            return rng.normal(p["mean"], math.sqrt(p["var"]), n)
        if self.kind == "gamma":
            return rng.gamma(p["shape"], 1.0 / p["rate"], n)
        out = np.empty(n)
        filled = 0
        while filled < n:
            k = n - filled
            centers = self.sample_points[rng.integers(0, self.sample_points.size, k)]
            x = centers + rng.normal(0.0, p["bandwidth"], k)
            x = x[(x >= p["a"]) & (x <= p["b"])]
            out[filled:filled + x.size] = x
            filled += x.size
        return out

    def pdf(self, x):
        """Density at the given points (zero outside the support)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "uniform":
            inside = (x >= p["a"]) & (x <= p["b"])
            return np.where(inside, 1.0 / (p["b"] - p["a"]), 0.0)
        if self.kind == "gaussian":
            sd = math.sqrt(p["var"])
            z = (x - p["mean"]) / sd
            return np.exp(-0.5 * z * z) / (sd * _SQRT_2PI)
        if self.kind == "gamma":
            from scipy.stats import gamma as _gamma
            return _gamma.pdf(x, p["shape"], scale=1.0 / p["rate"])
        dens = kde_density(self.sample_points, x, bandwidth=p["bandwidth"])
        dens = dens / self._kde_mass()
        inside = (x >= p["a"]) & (x <= p["b"])
        return np.where(inside, dens, 0.0)

    def __repr__(self):
        return f"Marginal({self.kind}, {self.params})"


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Product prior with independent named marginals."""

    marginals: tuple
    names: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.marginals) < 1:
            raise ConfigurationError("prior needs at least one marginal")
        if len(self.marginals) != len(self.names):
            raise ConfigurationError("marginals and names must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ConfigurationError("marginal names must be unique")

    @property
    def dim(self):
        return len(self.marginals)

    def support(self, j):
        return self.marginals[j].support()

    def replace(self, j, marginal):
        """New prior with marginal ``j`` swapped out."""
        updated = list(self.marginals)
        updated[j] = marginal
        return PriorSpec(tuple(updated), self.names)

    def midpoints(self):
        """Support midpoints, the default nominal values."""
        out = np.empty(self.dim)
        for j, m in enumerate(self.marginals):
            lo, hi = m.support()
            if not (np.isfinite(lo) and np.isfinite(hi)):
                p = m.params
                out[j] = p.get("mean", p.get("shape", 0.0) / p.get("rate", 1.0))
            else:
                out[j] = 0.5 * (lo + hi)
        return out


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Non-negative weights summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        object.__setattr__(self, "w", w)
        if w.size < 1:
            raise ConfigurationError("weight vector is empty")
        if np.any(w < -1e-12) or np.any(w > 1.0 + 1e-12):
            raise ConfigurationError("weights must lie in [0, 1]")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ConfigurationError(f"weights sum to {w.sum()!r}, expected 1")

    def __len__(self):
        return self.w.size


def sample_prior(prior, n, seed):
    """Draw an (n x d) input sample from a product prior.

    Deterministic given the seed; columns follow the marginal order.
    """
    if n < 1:
        raise ConfigurationError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, prior.dim))
    for j, marginal in enumerate(prior.marginals):
        out[:, j] = marginal.draw(rng, n)
    return out


def sample_dirichlet(p, M, seed):
    """(M x p) rows from the flat Dirichlet (uniform on the simplex)."""
    if p < 1 or M < 1:
        raise ConfigurationError("dirichlet dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(p), size=M)


def kde_density(sample, eval_points, bandwidth="silverman"):
    """Gaussian kernel density estimate evaluated pointwise.

    ``bandwidth`` is either a positive float or ``"silverman"``. The
    sample dimension is processed in chunks so large MCMC pools do not
    materialize a full (n_eval x n_sample) matrix.
    """
    sample = np.asarray(sample, dtype=float).ravel()
    eval_points = np.asarray(eval_points, dtype=float).ravel()
    if sample.size < 2:
        raise DegenerateSampleError("KDE needs at least two sample points")
    if bandwidth == "silverman":
        h = silverman_bandwidth(sample)
    else:
        h = float(bandwidth)
        if h <= 0.0:
            raise DegenerateSampleError("bandwidth must be positive")
    out = np.zeros(eval_points.size)
    step = 16384
    for start in range(0, sample.size, step):
        z = (eval_points[:, None] - sample[None, start:start + step]) / h
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out / (sample.size * h * _SQRT_2PI)


def _reflected_density(sample, grid, lo, hi, h):
    # Mirror the sample at both interval ends; standard boundary-bias fix
    # that keeps the estimate flat for near-uniform samples.
    dens = kde_density(sample, grid, bandwidth=h)
    dens += kde_density(2.0 * lo - sample, grid, bandwidth=h)
    dens += kde_density(2.0 * hi - sample, grid, bandwidth=h)
    return dens


def kl_vs_uniform(posterior_sample, support, grid_size=512, bandwidth="silverman"):
    """Information gain of a sample relative to the uniform on ``support``.

    Estimates d_KL(posterior || uniform) from a boundary-reflected KDE on
    a fixed quadrature grid. Estimates are floored at zero, since KDE
    error can otherwise produce slightly negative values.
    """
    sample = np.asarray(posterior_sample, dtype=float).ravel()
    lo, hi = float(support[0]), float(support[1])
    if not lo < hi:
        raise ConfigurationError("support must satisfy lo < hi")
    if sample.size and (sample.min() < lo or sample.max() > hi):
        raise DomainError(
            f"sample range [{sample.min():g}, {sample.max():g}] leaves the "
            f"support [{lo:g}, {hi:g}]"
        )
    h = silverman_bandwidth(sample) if bandwidth == "silverman" else float(bandwidth)
    grid = np.linspace(lo, hi, grid_size)
    dens = _reflected_density(sample, grid, lo, hi, h)
    mass = np.trapezoid(dens, grid)
    if mass <= 0.0:
        raise DegenerateSampleError("KDE places no mass on the support")
    dens = np.maximum(dens / mass, 1e-12)
    uniform = 1.0 / (hi - lo)
    kl = float(np.trapezoid(dens * np.log(dens / uniform), grid))
    return max(kl, 0.0)
