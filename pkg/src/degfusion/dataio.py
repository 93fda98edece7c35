"""CSV and directory serialization.

All emitters use fixed headers and 17-significant-digit floats so that a
rerun with identical seeds reproduces output directories byte for byte.
"""

import csv
import json
import os

import numpy as np

from .errors import ConfigurationError
from .models import DataGroup
from .probability import kde_density

FLOAT_FMT = ".17g"


def _fmt(x):
    return format(float(x), FLOAT_FMT)


def write_data_groups_csv(groups, path):
    """``group_id,time,value`` rows, one per observation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "time", "value"])
        for g in groups:
            for t, v in zip(g.times, g.values):
                writer.writerow([g.group_id, _fmt(t), _fmt(v)])


def load_data_csv(path):
    """Parse observation groups, sorting each by time.

    Duplicated (group, time) pairs, malformed numbers, a wrong header or
    an empty table are configuration errors naming the file and line.
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"data file not found: {path}")
    by_group = {}
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["group_id", "time", "value"]:
            raise ConfigurationError(
                f"{path}:1: expected header 'group_id,time,value', got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ConfigurationError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            gid = row[0].strip()
            try:
                t, v = float(row[1]), float(row[2])
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{lineno}: non-numeric time or value"
                ) from None
            if (gid, t) in seen:
                raise ConfigurationError(
                    f"{path}:{lineno}: duplicate observation ({gid}, {row[1]})"
                )
            seen.add((gid, t))
            by_group.setdefault(gid, []).append((t, v))
    if not by_group:
        raise ConfigurationError(f"{path}: no observations")
    groups = []
    for gid, rows in by_group.items():
        rows.sort()
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        groups.append(DataGroup(gid, times, values))
    return groups


def write_trajectory_csv(path, grid_points, values):
    """``time,value`` rows for one trajectory."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "value"])
        for t, v in zip(grid_points, values):
            writer.writerow([_fmt(t), _fmt(v)])


def write_trajectory_matrix_csv(path, grid_points, Y, max_columns=None):
    """``time,traj_0,traj_1,...`` for an (N x n) ensemble, optionally
    keeping only the first ``max_columns`` trajectories."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[1] if max_columns is None else min(Y.shape[1], max_columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"traj_{i}" for i in range(n)])
        for k, t in enumerate(grid_points):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in Y[k, :n]])


def write_rul_csv(path, rul):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "cdf"])
        for t, c in zip(rul.times, rul.cdf):
            writer.writerow([_fmt(t), _fmt(c)])


def write_sample_csv(path, sample):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in sample:
            writer.writerow([_fmt(v)])


def write_density_csv(path, xs, density):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "density"])
        for x, d in zip(xs, density):
            writer.writerow([_fmt(x), _fmt(d)])


def write_chain_traces_csv(path, chains):
    """``chain_id,iteration,state,log_post,accepted`` for every step."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain_id", "iteration", "state", "log_post", "accepted"])
        for cid, chain in enumerate(chains):
            for i in range(chain.length):
                writer.writerow([cid, i, _fmt(chain.states[i]),
                                 _fmt(chain.log_posts[i]),
                                 int(chain.accept_flags[i])])


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def history_payload(report):
    """JSON-ready summary of a pipeline run (no wall-clock content)."""
    return {
        "variables": list(report.names),
        "converged": report.converged,
        "cap_reached": report.cap_reached,
        "epsilon": report.settings.epsilon,
        "seed": report.settings.seed,
        "t_present": report.t_present,
        "nominal": [float(v) for v in report.nominal],
        "iterations": [
            {
                "iteration": rec.iteration,
                "selected": rec.selected_name,
                "selected_index": rec.selected_index,
                "kl": rec.kl,
                "r_hat": rec.r_hat,
                "acceptance_rates": list(rec.acceptance_rates),
                "updated": rec.updated,
                "chains_converged": rec.converged_chains,
                "forward_mode": rec.forward_mode,
                "hsic_averaged": [float(v) for v in rec.hsic_averaged],
            }
            for rec in report.history
        ],
        "final_kl": report.final_kl,
    }


def write_report(report, out_dir, config_echo=None, max_trajectories=200,
                 kde_points=256):
    """Serialize a pipeline report into a directory.

    Layout: ``posteriors/<var>.csv`` (samples), ``kde/<var>.csv``
    (density curves), ``rul_prior.csv`` / ``rul_posterior.csv``,
    ``trajectories_prior.csv`` / ``trajectories_posterior.csv`` and
    ``history.json``; the run configuration is echoed verbatim when
    given.
    """
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "posteriors"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "kde"), exist_ok=True)

    name_to_index = {name: j for j, name in enumerate(report.names)}
    for name, sample in report.posterior_samples.items():
        write_sample_csv(os.path.join(out_dir, "posteriors", f"{name}.csv"), sample)
        lo, hi = report.final_prior.support(name_to_index[name])
        xs = np.linspace(lo, hi, kde_points)
        write_density_csv(os.path.join(out_dir, "kde", f"{name}.csv"),
                          xs, kde_density(sample, xs))

    grid_pts = report.grid.points
    write_trajectory_matrix_csv(os.path.join(out_dir, "trajectories_prior.csv"),
                                grid_pts, report.trajectories_prior,
                                max_columns=max_trajectories)
    write_trajectory_matrix_csv(os.path.join(out_dir, "trajectories_posterior.csv"),
                                grid_pts, report.trajectories_posterior,
                                max_columns=max_trajectories)
    if report.rul_prior is not None:
        write_rul_csv(os.path.join(out_dir, "rul_prior.csv"), report.rul_prior)
        write_rul_csv(os.path.join(out_dir, "rul_posterior.csv"), report.rul_posterior)
    write_json(os.path.join(out_dir, "history.json"), history_payload(report))
    if config_echo is not None:
        with open(os.path.join(out_dir, "config.json"), "wb") as fh:
            fh.write(config_echo)
