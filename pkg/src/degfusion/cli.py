"""Command-line entry points.

Subcommands: ``simulate``, ``doe``, ``sensitivity``, ``surrogate``,
``assimilate``, ``rul``, ``pipeline``. Every command takes ``--config``,
``--seed`` (overrides the config seed) and ``--out``; each writes a
verbatim echo of its configuration into the output directory so any run
is replayable from its outputs alone.

Exit codes: 0 success/convergence, 2 configuration or data error,
3 iteration cap reached, 4 chain non-convergence (results still written).
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import dataio
from .config import load_config
from .errors import DegfusionError
from .fusion import FusionProblem, log_posterior
from .hsic import rank_and_select
from .mcmc import gelman_rubin, posterior_sample, run_chains
from .models import build_doe
from .pipeline import (
    merged_data_times,
    rul_cdf,
    run_full_pipeline,
    segmented_assimilation,
)
from .probability import kl_vs_uniform, sample_dirichlet
from .surrogate import build_ensemble, q2_score, save_ensemble

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_NOT_CONVERGED = 4


def _prepare(args):
    cfg = load_config(args.config, seed_override=args.seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.json"), "wb") as fh:
        fh.write(cfg.echo)
    dataio.write_json(os.path.join(args.out, "run.json"),
                      {"command": args.command, "seed": cfg.seed})
    return cfg


def _cmd_simulate(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    _, nominal = cfg.build_prior()
    values = model.evaluate(nominal)
    dataio.write_trajectory_csv(os.path.join(args.out, "trajectory.csv"),
                                model.grid.points, values)
    return EXIT_OK


def _cmd_doe(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    prior, _ = cfg.build_prior()
    doe = build_doe(model, prior, cfg.doe_n, cfg.seed)
    with open(os.path.join(args.out, "doe_inputs.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(prior.names))
        for row in doe.inputs:
            writer.writerow([format(v, ".17g") for v in row])
    dataio.write_trajectory_matrix_csv(os.path.join(args.out, "doe_outputs.csv"),
                                       model.grid.points, doe.outputs,
                                       max_columns=cfg.trajectories_saved)
    return EXIT_OK


def _cmd_sensitivity(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    prior, _ = cfg.build_prior()
    groups = cfg.load_groups()
    doe = build_doe(model, prior, cfg.doe_n, cfg.seed)
    report = rank_and_select(doe.inputs, doe.outputs, model.grid,
                             merged_data_times(groups), names=prior.names)
    report.to_csv(os.path.join(args.out, "hsic.csv"))
    return EXIT_OK


def _cmd_surrogate(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    prior, _ = cfg.build_prior()
    groups = cfg.load_groups()
    times = merged_data_times(groups)
    doe = build_doe(model, prior, cfg.doe_n, cfg.seed)
    n_train = max(int(0.8 * doe.size), doe.size - 200)
    settings = cfg.settings()
    from .models import DesignOfExperiments
    train = DesignOfExperiments(doe.inputs[:n_train], doe.outputs[:, :n_train],
                                model.grid)
    ensemble = build_ensemble(train, times, trends=settings.ensemble_trends,
                              kernels=settings.ensemble_kernels,
                              truncation_fraction=settings.truncation_fraction,
                              centered=settings.ensemble_centered)
    save_ensemble(ensemble, os.path.join(args.out, "ensemble.zip"))
    from ._interp import interp_columns
    test_out = interp_columns(model.grid.points, doe.outputs[:, n_train:], times).T
    with open(os.path.join(args.out, "q2.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["member", "q2_time_averaged", "flagged_below_0.5"])
        for member in ensemble.members:
            _, avg = q2_score(member.predict, doe.inputs[n_train:], test_out)
            writer.writerow([member.label, format(avg, ".17g"), int(avg < 0.5)])
    return EXIT_OK


def _cmd_assimilate(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    prior, nominal = cfg.build_prior()
    groups = cfg.load_groups()
    settings = cfg.settings()
    times = merged_data_times(groups)
    doe = build_doe(model, prior, cfg.doe_n, cfg.seed)
    report = rank_and_select(doe.inputs, doe.outputs, model.grid, times,
                             names=prior.names)
    j = report.selected_index
    support = prior.support(j)
    if settings.forward == "ensemble":
        ensemble = build_ensemble(doe, times, trends=settings.ensemble_trends,
                                  kernels=settings.ensemble_kernels,
                                  truncation_fraction=settings.truncation_fraction,
                                  centered=settings.ensemble_centered)
        weights = sample_dirichlet(ensemble.size, settings.weight_samples, cfg.seed)
        problem = FusionProblem.with_ensemble(ensemble, nominal, j, support,
                                              groups, weights)
    else:
        problem = FusionProblem.direct(model, nominal, j, support, groups)
    width = support[1] - support[0]
    inits = support[0] + (np.arange(settings.n_chains) + 0.5) / settings.n_chains * width
    chains = run_chains(lambda t: log_posterior(t, problem), support, inits,
                        [settings.step_fraction * width] * settings.n_chains,
                        settings.chain_length, cfg.seed,
                        adapt_fraction=settings.adapt_fraction)
    conv = gelman_rubin(chains, settings.burn_in)
    sample = posterior_sample(chains, settings.burn_in, settings.thin)
    dataio.write_chain_traces_csv(os.path.join(args.out, "chains.csv"), chains)
    dataio.write_sample_csv(os.path.join(args.out, "posterior.csv"), sample)
    dataio.write_json(os.path.join(args.out, "diagnostics.json"), {
        "variable": prior.names[j],
        "r_hat": conv.R,
        "acceptance_rates": [c.acceptance_rate for c in chains],
        "kl_vs_uniform": kl_vs_uniform(sample, support),
    })
    if conv.R >= settings.r_threshold:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_rul(args):
    cfg = _prepare(args)
    if cfg.rul_threshold is None:
        raise DegfusionError("config: rul.threshold is required for the rul command")
    model = cfg.build_model()
    prior, _ = cfg.build_prior()
    groups = cfg.load_groups()
    doe = build_doe(model, prior, cfg.doe_n, cfg.seed)
    t_present = max(float(g.times.max()) for g in groups) if groups \
        else float(model.grid.points[0])
    rul = rul_cdf(doe.outputs, model.grid, cfg.rul_threshold, t_present)
    dataio.write_rul_csv(os.path.join(args.out, "rul.csv"), rul)
    return EXIT_OK


def _cmd_pipeline(args):
    cfg = _prepare(args)
    model = cfg.build_model()
    prior, nominal = cfg.build_prior()
    groups = cfg.load_groups()
    settings = cfg.settings()
    if args.segmented:
        reports = segmented_assimilation(model, prior, groups, settings,
                                         names=prior.names)
        status = EXIT_OK
        for s, report in enumerate(reports):
            if report is None:
                continue
            dataio.write_report(report, os.path.join(args.out, f"segment_{s}"),
                                max_trajectories=cfg.trajectories_saved)
            if any(not r.converged_chains for r in report.history):
                status = EXIT_NOT_CONVERGED
            elif report.cap_reached and status == EXIT_OK:
                status = EXIT_CAP
        return status
    report = run_full_pipeline(model, prior, groups, settings,
                               names=prior.names, nominal=nominal)
    dataio.write_report(report, args.out, config_echo=cfg.echo,
                        max_trajectories=cfg.trajectories_saved)
    if any(not r.converged_chains for r in report.history):
        return EXIT_NOT_CONVERGED
    if report.cap_reached:
        return EXIT_CAP
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "doe": _cmd_doe,
    "sensitivity": _cmd_sensitivity,
    "surrogate": _cmd_surrogate,
    "assimilate": _cmd_assimilate,
    "rul": _cmd_rul,
    "pipeline": _cmd_pipeline,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="degfusion",
        description="Iterative Bayesian fusion of heterogeneous degradation data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="degfusion-out",
                       help="output directory (created if missing)")
        if name == "pipeline":
            p.add_argument("--segmented", action="store_true",
                           help="assimilate each between-reset segment independently")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DegfusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
