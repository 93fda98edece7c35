"""Run configuration: one JSON document, validated eagerly.

Top-level keys: ``seed``, ``model``, ``prior``, ``data``, ``doe``,
``mcmc``, ``fusion``, ``ensemble``, ``rul``, ``output``. Unknown keys are
rejected so typos fail loudly. The raw file bytes are retained for the
verbatim echo every output directory receives.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .models import ParisModel, PiecewiseResetModel, TimeGrid, generate_data_groups
from .pipeline import PipelineSettings
from .probability import Marginal, PriorSpec

_TOP_KEYS = {"seed", "model", "prior", "data", "doe", "mcmc", "fusion",
             "ensemble", "rul", "output"}


def _require(mapping, key, kind, where):
    if key not in mapping:
        raise ConfigurationError(f"config: missing {where}.{key}")
    value = mapping[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigurationError(f"config: {where}.{key} has wrong type")
    return value


def _optional(mapping, key, default):
    return mapping.get(key, default)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run configuration plus the raw bytes it came from."""

    seed: int
    model_cfg: dict
    prior_rows: tuple
    data_cfg: dict
    doe_n: int
    mcmc_cfg: dict
    fusion_cfg: dict
    ensemble_cfg: dict
    rul_threshold: float
    trajectories_saved: int
    echo: bytes
    base_dir: str

    # -- builders ----------------------------------------------------------

    def build_model(self):
        cfg = self.model_cfg
        grid_cfg = cfg["grid"]
        grid = TimeGrid.regular(grid_cfg["start"], grid_cfg["stop"], grid_cfg["step"])
        if cfg["kind"] == "paris":
            return ParisModel(grid, cap=cfg.get("cap"))
        return PiecewiseResetModel(grid, cfg.get("reset_times", ()),
                                   cfg.get("reset_factor", 0.5))

    def build_prior(self):
        marginals, names, nominals = [], [], []
        for row in self.prior_rows:
            names.append(row["name"])
            dist = row["dist"]
            if dist == "uniform":
                lo, hi = row["bounds"]
                marginals.append(Marginal.uniform(lo, hi))
                nominals.append(row.get("nominal", 0.5 * (lo + hi)))
            elif dist == "gaussian":
                marginals.append(Marginal.gaussian(row["mean"], row["var"]))
                nominals.append(row.get("nominal", row["mean"]))
            else:
                marginals.append(Marginal.gamma(row["shape"], row["rate"]))
                nominals.append(row.get("nominal", row["shape"] / row["rate"]))
        return PriorSpec(tuple(marginals), tuple(names)), np.array(nominals)

    def load_groups(self):
        from .dataio import load_data_csv

        if "path" in self.data_cfg:
            path = self.data_cfg["path"]
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            return load_data_csv(path)
        if "synthetic" not in self.data_cfg:
            return []
        syn = self.data_cfg["synthetic"]
        model = self.build_model()
        _, nominal = self.build_prior()
        truth = np.array(syn.get("truth", nominal), dtype=float)
        specs = []
        for grp in syn["groups"]:
            times = grp["times"]
            if isinstance(times, dict):
                times = np.linspace(times["start"], times["stop"], int(times["count"]))
            specs.append((np.asarray(times, dtype=float), grp["noise_sd"]))
        return generate_data_groups(model, truth, specs, syn.get("seed", self.seed))

    def settings(self):
        m, f, e = self.mcmc_cfg, self.fusion_cfg, self.ensemble_cfg
        return PipelineSettings(
            seed=self.seed,
            doe_size=self.doe_n,
            epsilon=f["epsilon"],
            n_chains=m["chains"],
            chain_length=m["length"],
            step_fraction=m["step_fraction"],
            burn_in=m["burn_in"],
            thin=m["thin"],
            r_threshold=m["r_threshold"],
            adapt_fraction=m["adapt_fraction"],
            weight_samples=f["weight_samples"],
            forward=f["forward"],
            measure_all=f["measure_all"],
            ensemble_trends=tuple(e["trends"]),
            ensemble_kernels=tuple(e["kernels"]),
            truncation_fraction=e["truncation"],
            ensemble_centered=e["centered"],
            rul_threshold=self.rul_threshold,
        )


def load_config(path, seed_override=None):
    """Read, validate and freeze a configuration file."""
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")

    seed = int(_require(doc, "seed", int, "top-level"))
    if seed_override is not None:
        seed = int(seed_override)

    model_cfg = _require(doc, "model", dict, "top-level")
    kind = _require(model_cfg, "kind", str, "model")
    if kind not in ("paris", "piecewise-reset"):
        raise ConfigurationError(f"config: model.kind must be 'paris' or 'piecewise-reset'")
    grid = _require(model_cfg, "grid", dict, "model")
    for key in ("start", "stop", "step"):
        _require(grid, key, (int, float), "model.grid")

    prior_rows = _require(doc, "prior", list, "top-level")
    if not prior_rows:
        raise ConfigurationError("config: prior table is empty")
    for i, row in enumerate(prior_rows):
        if not isinstance(row, dict):
            raise ConfigurationError(f"config: prior[{i}] must be an object")
        _require(row, "name", str, f"prior[{i}]")
        dist = _require(row, "dist", str, f"prior[{i}]")
        if dist == "uniform":
            bounds = _require(row, "bounds", list, f"prior[{i}]")
            if len(bounds) != 2:
                raise ConfigurationError(f"config: prior[{i}].bounds needs [lo, hi]")
        elif dist == "gaussian":
            _require(row, "mean", (int, float), f"prior[{i}]")
            _require(row, "var", (int, float), f"prior[{i}]")
        elif dist == "gamma":
            _require(row, "shape", (int, float), f"prior[{i}]")
            _require(row, "rate", (int, float), f"prior[{i}]")
        else:
            raise ConfigurationError(f"config: prior[{i}].dist {dist!r} unsupported")

    data_cfg = _optional(doc, "data", {})
    if not isinstance(data_cfg, dict):
        raise ConfigurationError("config: data must be an object")

    doe_n = int(_optional(_optional(doc, "doe", {}), "n", 1000))
    if doe_n < 10:
        raise ConfigurationError("config: doe.n must be at least 10")

    mcmc_defaults = {"chains": 5, "length": 10_000, "step_fraction": 0.1,
                     "burn_in": 0.5, "thin": 1, "r_threshold": 1.05,
                     "adapt_fraction": 0.0}
    mcmc_cfg = {**mcmc_defaults, **_optional(doc, "mcmc", {})}
    if set(mcmc_cfg) != set(mcmc_defaults):
        raise ConfigurationError(
            f"config: unknown mcmc keys {sorted(set(mcmc_cfg) - set(mcmc_defaults))}")

    fusion_defaults = {"epsilon": 0.1, "weight_samples": 100,
                       "forward": "auto", "measure_all": False}
    fusion_cfg = {**fusion_defaults, **_optional(doc, "fusion", {})}
    if set(fusion_cfg) != set(fusion_defaults):
        raise ConfigurationError(
            f"config: unknown fusion keys {sorted(set(fusion_cfg) - set(fusion_defaults))}")

    ensemble_defaults = {
        "trends": ["constant", "linear", "quadratic"],
        "kernels": ["matern12", "matern32", "matern52", "squared-exponential"],
        "truncation": 0.99,
        "centered": True,
    }
    ensemble_cfg = {**ensemble_defaults, **_optional(doc, "ensemble", {})}
    if set(ensemble_cfg) != set(ensemble_defaults):
        raise ConfigurationError(
            f"config: unknown ensemble keys {sorted(set(ensemble_cfg) - set(ensemble_defaults))}")

    rul_cfg = _optional(doc, "rul", {})
    rul_threshold = rul_cfg.get("threshold")

    output_cfg = _optional(doc, "output", {})
    trajectories_saved = int(output_cfg.get("trajectories_saved", 200))

    return RunConfig(
        seed=seed,
        model_cfg=model_cfg,
        prior_rows=tuple(prior_rows),
        data_cfg=data_cfg,
        doe_n=doe_n,
        mcmc_cfg=mcmc_cfg,
        fusion_cfg=fusion_cfg,
        ensemble_cfg=ensemble_cfg,
        rul_threshold=rul_threshold,
        trajectories_saved=trajectories_saved,
        echo=raw,
        base_dir=os.path.dirname(os.path.abspath(path)),
    )
