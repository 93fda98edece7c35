"""Linear time-grid interpolation shared by the sensitivity, fusion and
pipeline layers."""

import numpy as np

from .errors import DomainError


def _locate(grid, times):
    """Interval indices and weights for linear interpolation.

    Raises :class:`DomainError` on any extrapolation request. Times that
    coincide with grid nodes get weight 0 or 1, so node values reproduce
    exactly.
    """
    grid = np.asarray(grid, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size and (times.min() < grid[0] or times.max() > grid[-1]):
        raise DomainError(
            f"times in [{times.min():g}, {times.max():g}] extend outside the "
            f"grid span [{grid[0]:g}, {grid[-1]:g}]"
        )
    idx = np.searchsorted(grid, times, side="right") - 1
    idx = np.clip(idx, 0, grid.size - 2)
    w = (times - grid[idx]) / (grid[idx + 1] - grid[idx])
    return idx, w


def interp_values(grid, values, times):
    """Interpolate one trajectory (length-N vector) at the given times."""
    values = np.asarray(values, dtype=float)
    idx, w = _locate(grid, times)
    return values[idx] * (1.0 - w) + values[idx + 1] * w


def interp_columns(grid, Y, times):
    """Interpolate an (N x n) trajectory matrix at times.

    Returns a (len(times) x n) matrix; column i is trajectory i evaluated
    at every requested time.
    """
    Y = np.asarray(Y, dtype=float)
    idx, w = _locate(grid, times)
    return Y[idx] * (1.0 - w)[:, None] + Y[idx + 1] * w[:, None]
