"""Canonical example experiments.

These presets back the CLI config templates and the validation suite:
a crack-growth study with four heterogeneous observation groups, and a
piecewise-reset study with decreasing per-segment growth gains.

The crack-growth group meshes sit in the second half of the life so the
growth constant stays identifiable while the initial crack length does
not; noise levels were sized so the information-gain threshold of 0.1
separates exactly {C, m, sigma_max} from {sigma_min, Y, a0}.
"""

import numpy as np

from .models import (
    ParisModel,
    PiecewiseResetModel,
    TimeGrid,
    generate_data_groups,
)
from .pipeline import PipelineSettings
from .probability import Marginal, PriorSpec

# Crack-growth study ---------------------------------------------------------

PARIS_NOMINAL = np.array([1e-10, 3.0, 100.0, 10.0, 1.1, 1e-3])
PARIS_BOUNDS = (
    (0.9e-10, 1.1e-10),   # C
    (2.9, 3.1),           # m
    (95.0, 105.0),        # sigma_max (MPa)
    (9.0, 11.0),          # sigma_min (MPa)
    (1.09, 1.11),         # Y
    (0.9e-3, 1.1e-3),     # a0 (m)
)
PARIS_RUL_THRESHOLD = 0.05          # meters
PARIS_HORIZON = 120_600.0           # cycles; nominal crossing ~100.5k + 20%
PARIS_STEP = 100.0                  # cycles
PARIS_CAP = 0.5                     # meters; 10x the RUL threshold


def paris_prior():
    marginals = tuple(Marginal.uniform(lo, hi) for lo, hi in PARIS_BOUNDS)
    return PriorSpec(marginals, ("C", "m", "sigma_max", "sigma_min", "Y", "a0"))


def paris_grid():
    return TimeGrid.regular(0.0, PARIS_HORIZON, PARIS_STEP)


def paris_model(cap=PARIS_CAP):
    return ParisModel(paris_grid(), cap=cap)


def _jittered_mesh(lo, hi, count, seed):
    rng = np.random.default_rng(seed)
    base = np.linspace(lo, hi, count)
    return np.sort(base + (hi - lo) / (3 * count) * rng.uniform(-1, 1, count))


def paris_group_specs():
    """Four groups with distinct meshes, counts and noise levels (meters)."""
    return [
        (_jittered_mesh(60_000, 95_000, 12, 1), 0.020),
        (_jittered_mesh(65_000, 92_000, 9, 2), 0.026),
        (_jittered_mesh(62_000, 95_000, 15, 3), 0.032),
        (_jittered_mesh(70_000, 90_000, 8, 4), 0.038),
    ]


def paris_reference_data(seed):
    """Synthetic observation groups around the nominal trajectory."""
    return generate_data_groups(paris_model(), PARIS_NOMINAL,
                                paris_group_specs(), seed)


def paris_reference_settings(seed):
    """Loop settings sized for the crack-growth study."""
    return PipelineSettings(seed=seed, doe_size=1000, chain_length=10_000,
                            step_fraction=0.2, rul_threshold=PARIS_RUL_THRESHOLD,
                            measure_all=True)


# Piecewise-reset study ------------------------------------------------------

RESET_TIMES = (10.0, 20.0, 30.0)
RESET_FACTOR = 0.3
RESET_HORIZON = 40.0
RESET_STEP = 0.05
RESET_SEGMENT_GAINS = (1.1, 0.85, 0.6, 0.4)
RESET_NOMINAL_ACCEL = 0.1
RESET_NOMINAL_D0 = 0.08


def reset_prior():
    marginals = (
        Marginal.uniform(0.2, 1.4),    # gain
        Marginal.uniform(-0.3, 0.5),   # accel
        Marginal.uniform(0.02, 0.2),   # d0
    )
    return PriorSpec(marginals, ("gain", "accel", "d0"))


def reset_grid():
    return TimeGrid.regular(0.0, RESET_HORIZON, RESET_STEP)


def reset_model():
    return PiecewiseResetModel(reset_grid(), RESET_TIMES, RESET_FACTOR)


def reset_reference_settings(seed):
    """Loop settings sized for the piecewise-reset study.

    The observation noise is small relative to the gain sensitivity, so
    the posteriors are narrow; step adaptation during burn-in keeps the
    chains mixing.
    """
    return PipelineSettings(seed=seed, doe_size=400, chain_length=4000,
                            step_fraction=0.2, adapt_fraction=0.4)


def reset_reference_data(seed, noise_sds=(0.03, 0.05), points_per_segment=7):
    """Two observation groups spanning all segments, generated from a
    trajectory whose gain decreases segment by segment."""
    model = reset_model()
    truth = model.trajectory_with_segment_gains(
        RESET_SEGMENT_GAINS, RESET_NOMINAL_ACCEL, RESET_NOMINAL_D0)
    rng = np.random.default_rng(seed)
    from .models import DataGroup

    groups = []
    for i, noise in enumerate(noise_sds):
        times = []
        for lo, hi in model.segment_bounds():
            span = hi - lo
            seg = np.linspace(lo + 0.08 * span, hi - 0.08 * span,
                              points_per_segment)
            seg = seg + span / (6 * points_per_segment) * rng.uniform(
                -1, 1, points_per_segment)
            times.append(np.sort(seg))
        times = np.concatenate(times)
        values = truth.at(times) + rng.normal(0.0, noise, times.size)
        groups.append(DataGroup(f"g{i + 1}", times, values, noise_sd=noise))
    return groups
