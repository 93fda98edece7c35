"""Time-dependent degradation simulators.

Two models implement the ``evaluate`` / ``evaluate_batch`` simulator
interface mapping an input vector to a trajectory on a fixed time grid:

* :class:`ParisModel` — explicit-Euler fatigue crack growth driven by the
  stress-intensity range. Units are fixed: stresses in MPa, lengths in
  meters, time in load cycles; the usual magnitude of the growth constant
  (~1e-10) is only meaningful under this convention.
* :class:`PiecewiseResetModel` — a synthetic monotone-growth model whose
  value is knocked down by a multiplicative factor at given reset times,
  standing in for maintenance events that split a history into
  independently calibratable segments.

Simulators are stateless; batch evaluation is column-pure, so permuting
input rows permutes output columns identically.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._interp import interp_values
from .errors import ConfigurationError, DomainError, NumericalOverflowError

PARIS_NAMES = ("C", "m", "sigma_max", "sigma_min", "Y", "a0")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing simulation time grid (cycles or years)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        if pts.size < 2:
            raise ConfigurationError("time grid needs at least two points")
        if not np.all(np.diff(pts) > 0):
            raise ConfigurationError("time grid must be strictly increasing")

    @classmethod
    def regular(cls, start, stop, step):
        if step <= 0 or stop <= start:
            raise ConfigurationError("regular grid needs step > 0 and stop > start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return cls(start + step * np.arange(n))

    @property
    def size(self):
        return self.points.size

    @property
    def span(self):
        return float(self.points[0]), float(self.points[-1])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Degradation values sampled on a time grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)
        if vals.size != self.grid.size:
            raise ConfigurationError("trajectory length does not match its grid")
        if np.any(vals < 0):
            raise ConfigurationError("degradation values must be non-negative")

    def at(self, times):
        return interp_values(self.grid.points, self.values, times)


@dataclass(frozen=True)
class ParisInputs:
    """Crack-growth inputs: growth constant C, exponent m, stress extremes
    (MPa), geometry factor and initial crack length (m)."""

    C: float
    m: float
    sigma_max: float
    sigma_min: float
    Y: float
    a0: float

    def __post_init__(self):
        if self.C < 0:
            raise ConfigurationError("C must be >= 0")
        if self.m <= 0:
            raise ConfigurationError("m must be > 0")
        if not self.sigma_max > self.sigma_min >= 0:
            raise ConfigurationError("stresses must satisfy sigma_max > sigma_min >= 0")
        if self.Y <= 0 or self.a0 <= 0:
            raise ConfigurationError("Y and a0 must be > 0")

    def to_array(self):
        return np.array([self.C, self.m, self.sigma_max, self.sigma_min, self.Y, self.a0])


@dataclass(frozen=True, eq=False)
class DataGroup:
    """One heterogeneous observation group on its own acquisition times.

    ``noise_sd`` documents how synthetic values were generated; inference
    never reads it.
    """

    group_id: str
    times: np.ndarray
    values: np.ndarray
    noise_sd: float = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.size < 1:
            raise ConfigurationError(f"group {self.group_id!r} is empty")
        if times.size != values.size:
            raise ConfigurationError(f"group {self.group_id!r}: times/values length mismatch")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ConfigurationError(f"group {self.group_id!r}: times must be strictly increasing")

    @property
    def size(self):
        return self.times.size


class ParisModel:
    """Explicit-Euler integrator of da/dN = C * (dsigma * sqrt(pi*a) * Y)**m.

    ``cap`` clips the crack length; a per-step increment above ten times
    the cap (or a non-finite one) raises :class:`NumericalOverflowError`
    naming the failing cycle instead of silently producing inf.
    """

    dim = len(PARIS_NAMES)
    names = PARIS_NAMES

    def __init__(self, grid, cap=None):
        self.grid = grid
        self.cap = None if cap is None else float(cap)
        self._cap = np.inf if cap is None else float(cap)
        self._max_step = np.inf if cap is None else 10.0 * float(cap)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise ConfigurationError(f"expected {self.dim} inputs, got {x.size}")
        values, fail = _kernels.paris_scalar(
            x[0], x[1], x[2], x[3], x[4], x[5],
            self.grid.points, self._cap, self._max_step,
        )
        if fail != 0:
            raise NumericalOverflowError(
                f"non-finite or runaway crack growth at cycle {self.grid.points[fail]:g}"
            )
        return values

    def evaluate_batch(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        values, fail, row = _kernels.paris_batch(
            X, self.grid.points, self._cap, self._max_step
        )
        if fail != 0:
            raise NumericalOverflowError(
                f"non-finite or runaway crack growth at cycle "
                f"{self.grid.points[fail]:g} for input row {row}"
            )
        return values


def paris_trajectory(inputs, grid, cap=None):
    """Single crack-growth trajectory for validated inputs."""
    model = ParisModel(grid, cap=cap)
    return Trajectory(grid, model.evaluate(inputs.to_array()))


class PiecewiseResetModel:
    """Monotone growth with multiplicative knock-downs at reset times.

    Inputs are ``(gain, accel, d0)``: the instantaneous growth rate is
    ``gain * (1 + accel * t / t_end)`` integrated in closed form, starting
    from ``d0``; at each reset time the value is multiplied by
    ``reset_factor``. A grid point falling exactly on a reset time carries
    the post-reset value.
    """

    dim = 3
    names = ("gain", "accel", "d0")

    def __init__(self, grid, reset_times=(), reset_factor=0.5):
        self.grid = grid
        reset_times = np.asarray(reset_times, dtype=float).ravel()
        if not 0.0 < reset_factor < 1.0:
            raise ConfigurationError("reset_factor must lie in (0, 1)")
        if reset_times.size:
            if not np.all(np.diff(reset_times) > 0):
                raise ConfigurationError("reset times must be strictly increasing")
            lo, hi = grid.span
            if reset_times[0] <= lo or reset_times[-1] >= hi:
                raise ConfigurationError("reset times must lie strictly inside the horizon")
        self.reset_times = reset_times
        self.reset_factor = float(reset_factor)

    def _growth_integral(self, t, accel):
        t_end = self.grid.points[-1]
        return t + accel * t * t / (2.0 * t_end)

    def segment_bounds(self):
        """(start, end) of each of the c+1 segments."""
        lo, hi = self.grid.span
        edges = [lo, *self.reset_times.tolist(), hi]
        return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float).ravel()
        gain, accel, d0 = x
        if gain < 0 or d0 < 0:
            raise ConfigurationError("gain and d0 must be non-negative")
        if accel <= -1.0:
            raise ConfigurationError("accel must exceed -1 to keep growth monotone")
        pts = self.grid.points
        out = np.empty(pts.size)
        value = d0
        seg_start = pts[0]
        boundaries = [*self.reset_times.tolist(), np.inf]
        lo_idx = 0
        for boundary in boundaries:
            mask = slice(lo_idx, int(np.searchsorted(pts, boundary, side="left")))
            f0 = self._growth_integral(seg_start, accel)
            out[mask] = value + gain * (self._growth_integral(pts[mask], accel) - f0)
            lo_idx = mask.stop
            if np.isfinite(boundary):
                value = self.reset_factor * (
                    value + gain * (self._growth_integral(boundary, accel) - f0)
                )
                seg_start = boundary
        return out

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((self.grid.size, X.shape[0]))
        for r in range(X.shape[0]):
            out[:, r] = self.evaluate(X[r])
        return out

    def trajectory_with_segment_gains(self, gains, accel, d0):
        """Trajectory whose gain switches to ``gains[s]`` inside segment s.

        Ground-truth generator for segmented-assimilation experiments.
        """
        gains = np.asarray(gains, dtype=float).ravel()
        if gains.size != self.reset_times.size + 1:
            raise ConfigurationError("need one gain per segment")
        pts = self.grid.points
        out = np.empty(pts.size)
        value = float(d0)
        seg_start = pts[0]
        boundaries = [*self.reset_times.tolist(), np.inf]
        lo_idx = 0
        for s, boundary in enumerate(boundaries):
            mask = slice(lo_idx, int(np.searchsorted(pts, boundary, side="left")))
            f0 = self._growth_integral(seg_start, accel)
            out[mask] = value + gains[s] * (self._growth_integral(pts[mask], accel) - f0)
            lo_idx = mask.stop
            if np.isfinite(boundary):
                value = self.reset_factor * (
                    value + gains[s] * (self._growth_integral(boundary, accel) - f0)
                )
                seg_start = boundary
        return Trajectory(self.grid, out)


def piecewise_reset_trajectory(inputs, grid, reset_times, reset_factor):
    """Single reset-model trajectory."""
    model = PiecewiseResetModel(grid, reset_times, reset_factor)
    return Trajectory(grid, model.evaluate(np.asarray(inputs, dtype=float)))


def evaluate_model_batch(model, X, grid=None):
    """(N x n) output matrix; column i is the trajectory for input row i.

    Uses the model's native batch path when present; per-row failures are
    re-raised with the row index attached.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ConfigurationError("input sample must be a 2-D matrix")
    if grid is not None and grid is not model.grid:
        raise ConfigurationError("grid argument disagrees with the model's grid")
    if hasattr(model, "evaluate_batch"):
        return model.evaluate_batch(X)
    out = np.empty((model.grid.size, X.shape[0]))
    for r in range(X.shape[0]):
        try:
            out[:, r] = model.evaluate(X[r])
        except Exception as exc:
            raise type(exc)(f"row {r}: {exc}") from exc
    return out


def generate_data_groups(model, x_true, group_specs, seed):
    """Synthetic observation groups around one nominal trajectory.

    Each spec is ``(times, noise_sd)``; values are the nominal trajectory
    linearly interpolated at the times plus centered Gaussian noise drawn
    in spec order, so the output is deterministic given the seed.
    """
    nominal = model.evaluate(np.asarray(x_true, dtype=float))
    lo, hi = model.grid.span
    rng = np.random.default_rng(seed)
    groups = []
    for i, (times, noise_sd) in enumerate(group_specs):
        times = np.asarray(times, dtype=float).ravel()
        if times.size and (times.min() < lo or times.max() > hi):
            raise DomainError(
                f"group {i + 1} times leave the simulation horizon [{lo:g}, {hi:g}]"
            )
        if not noise_sd > 0:
            raise ConfigurationError("noise_sd must be > 0")
        clean = interp_values(model.grid.points, nominal, times)
        values = clean + rng.normal(0.0, noise_sd, times.size)
        groups.append(DataGroup(f"g{i + 1}", times, values, noise_sd=float(noise_sd)))
    return groups


@dataclass(frozen=True, eq=False)
class DesignOfExperiments:
    """Paired input sample (n x d) and output trajectories (N x n)."""

    inputs: np.ndarray
    outputs: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        if self.outputs.shape != (self.grid.size, self.inputs.shape[0]):
            raise ConfigurationError("DoE outputs must be (grid size x sample size)")

    @property
    def size(self):
        return self.inputs.shape[0]


def build_doe(model, prior, n, seed):
    """Sample the prior and push every row through the simulator."""
    from .probability import sample_prior

    X = sample_prior(prior, n, seed)
    Y = evaluate_model_batch(model, X)
    return DesignOfExperiments(X, Y, model.grid)
