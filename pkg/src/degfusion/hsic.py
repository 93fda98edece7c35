"""Kernel-based global sensitivity analysis.

Dependence between each input variable and the simulated output at the
observation times is scored with the Hilbert-Schmidt independence
criterion, estimated by the plug-in V-statistic
``Tr(L_x H L_z H) / n**2`` on Gaussian Gram matrices whose bandwidth is
the empirical standard deviation of each sample. The normalized index
``hsic(x, z) / sqrt(hsic(x, x) * hsic(z, z))`` is averaged over the
observation times to rank variables.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ._interp import interp_columns
from .errors import (
    ConfigurationError,
    DegenerateSampleError,
    DomainError,
    ExhaustedVariablesError,
    ShapeError,
)

log = logging.getLogger(__name__)

MAX_GRAM_SIZE = 5000


def _as_sample(x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size > MAX_GRAM_SIZE:
        raise ConfigurationError(
            f"sample size {x.size} exceeds the dense Gram limit {MAX_GRAM_SIZE}"
        )
    return x


def gram_matrix(sample, bandwidth):
    """Gaussian Gram matrix exp(-(x_p - x_q)**2 / (2 * bandwidth**2))."""
    x = _as_sample(sample)
    if x.size < 2:
        raise ShapeError("Gram matrix needs at least two points")
    if not bandwidth > 0:
        raise DegenerateSampleError("kernel bandwidth must be positive")
    z = (x[:, None] - x[None, :]) / bandwidth
    return np.exp(-0.5 * z * z)

def _bandwidth(x):
    sd = x.std(ddof=1)
    if sd <= 0:
        raise DegenerateSampleError("constant sample has no kernel bandwidth")
    return sd


def _center(K):
    # H K H without forming H
    row = K.mean(axis=0)
    return K - row[None, :] - row[:, None] + row.mean()


def _v_stat(K_centered, L):
    n = L.shape[0]
    return max(float(np.sum(K_centered * L)) / (n * n), 0.0)


def hsic_v_statistic(x_sample, z_sample):
    """Plug-in HSIC estimate between two equal-length samples."""
    x = _as_sample(x_sample)
    z = _as_sample(z_sample)
    if x.size != z.size:
        raise ShapeError(f"sample lengths differ: {x.size} vs {z.size}")
    if x.size < 4:
        raise ShapeError("HSIC estimation needs at least 4 points")
    Lx = gram_matrix(x, _bandwidth(x))
    Lz = gram_matrix(z, _bandwidth(z))
    return _v_stat(_center(Lx), Lz)


def r2_hsic(x_sample, z_sample):
    """Normalized HSIC index in [0, 1]."""
    x = _as_sample(x_sample)
    z = _as_sample(z_sample)
    if x.size != z.size:
        raise ShapeError(f"sample lengths differ: {x.size} vs {z.size}")
    if x.size < 4:
        raise ShapeError("HSIC estimation needs at least 4 points")
    Lx = gram_matrix(x, _bandwidth(x))
    Lz = gram_matrix(z, _bandwidth(z))
    cLx = _center(Lx)
    num = _v_stat(cLx, Lz)
    hxx = _v_stat(cLx, Lx)
    hzz = _v_stat(_center(Lz), Lz)
    denom = np.sqrt(hxx * hzz)
    if denom <= 0:
        raise DegenerateSampleError("degenerate normalization in r2_hsic")
    return min(num / denom, 1.0)


def permutation_null_r2(x_sample, z_sample, n_permutations, seed):
    """Normalized-index values under random permutations of ``z``.

    The permutation destroys any dependence while keeping both marginals,
    so the returned values sample the independence null.
    """
    x = _as_sample(x_sample)
    z = _as_sample(z_sample)
    if x.size != z.size:
        raise ShapeError(f"sample lengths differ: {x.size} vs {z.size}")
    Lx = gram_matrix(x, _bandwidth(x))
    Lz = gram_matrix(z, _bandwidth(z))
    cLx = _center(Lx)
    hxx = _v_stat(cLx, Lx)
    hzz = _v_stat(_center(Lz), Lz)
    denom = np.sqrt(hxx * hzz)
    if denom <= 0:
        raise DegenerateSampleError("degenerate normalization in permutation null")
    rng = np.random.default_rng(seed)
    out = np.empty(n_permutations)
    for i in range(n_permutations):
        perm = rng.permutation(z.size)
        out[i] = _v_stat(cLx, Lz[np.ix_(perm, perm)]) / denom
    return out


@dataclass(frozen=True, eq=False)
class HsicReport:
    """Per-variable, per-time normalized indices plus the selection."""

    r2: np.ndarray
    averaged: np.ndarray
    selected_index: int
    data_times: np.ndarray
    names: tuple

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["variable"] + [f"{t:.17g}" for t in self.data_times]
            writer.writerow(header + ["averaged", "selected"])
            for j, name in enumerate(self.names):
                row = [name] + [f"{v:.17g}" for v in self.r2[j]]
                row += [f"{self.averaged[j]:.17g}", str(int(j == self.selected_index))]
                writer.writerow(row)


def rank_and_select(doe_inputs, doe_outputs, sim_grid, data_times, exclude=None,
                    names=None):
    """Rank variables by time-averaged normalized HSIC and pick the top one.

    Outputs are linearly interpolated onto each observation time; the
    argmax over non-excluded variables breaks ties toward the lowest
    index. Deterministic: repeated calls on the same DoE return the same
    report.
    """
    X = np.asarray(doe_inputs, dtype=float)
    Y = np.asarray(doe_outputs, dtype=float)
    n, d = X.shape
    if n < 10:
        raise ConfigurationError("variable ranking needs a DoE of at least 10 rows")
    if Y.shape[1] != n:
        raise ShapeError("DoE outputs must have one column per input row")
    grid_pts = sim_grid.points if hasattr(sim_grid, "points") else np.asarray(sim_grid, float)
    times = np.asarray(data_times, dtype=float).ravel()
    if times.size == 0:
        raise ConfigurationError("no observation times to rank against")
    if times.min() < grid_pts[0] or times.max() > grid_pts[-1]:
        raise DomainError("observation times leave the simulation horizon")
    excluded = set() if exclude is None else set(int(j) for j in exclude)
    if len(excluded) >= d:
        raise ExhaustedVariablesError("every variable is excluded from selection")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(d))

    Z = interp_columns(grid_pts, Y, times)
    # Input Gram matrices are shared read-only across the time loop.
    centered_input_grams = []
    hxx = np.empty(d)
    for j in range(d):
        Lx = gram_matrix(X[:, j], _bandwidth(X[:, j]))
        cLx = _center(Lx)
        centered_input_grams.append(cLx)
        hxx[j] = _v_stat(cLx, Lx)

    r2 = np.empty((d, times.size))
    for ell in range(times.size):
        Lz = gram_matrix(Z[ell], _bandwidth(Z[ell]))
        hzz = _v_stat(_center(Lz), Lz)
        for j in range(d):
            denom = np.sqrt(hxx[j] * hzz)
            if denom <= 0:
                raise DegenerateSampleError(
                    f"degenerate normalization for variable {names[j]} at t={times[ell]:g}"
                )
            r2[j, ell] = min(_v_stat(centered_input_grams[j], Lz) / denom, 1.0)

    averaged = r2.mean(axis=1)
    candidates = [j for j in range(d) if j not in excluded]
    best = max(candidates, key=lambda j: (averaged[j], -j))
    ties = [j for j in candidates if j != best and averaged[j] == averaged[best]]
    if ties:
        log.warning("HSIC ranking tie between %s; keeping the lowest index",
                    [names[j] for j in (best, *ties)])
        best = min([best, *ties])
    return HsicReport(r2, averaged, int(best), times, names)
