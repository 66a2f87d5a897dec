"""Deterministic file output and reload of runs.

Every number is serialized with 17 significant digits, which round-trips
doubles exactly; reloading a run and re-analyzing it therefore reproduces
the analysis of the fresh run bit for bit.  A run directory contains the
verbatim configuration, a per-step scalar table, the energy ledger, field
snapshots at the configured schedule, a metadata file and a gnuplot
script referencing the tables.  Nothing time- or host-dependent is ever
written.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import config as cfgmod
from . import estimates as est
from . import longtime
from . import spectral as sp
from . import stepper as st
from .errors import ConfigurationError

TRAJECTORY_COLUMNS = ("t", "mean_y", "mean_mu", "norm_y", "norm_B_sigma_y",
                      "norm_mu", "norm_Ar_mu", "newton_iters")


def fmt(x) -> str:
    """17-significant-digit representation; exact double round-trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _json_value(obj) -> str:
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return '"nan"'
        if np.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return fmt(v)
    if isinstance(obj, np.ndarray):
        return _json_value(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{_json_value(str(k))}: {_json_value(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_value(obj) + "\n")


def trajectory_rows(traj: st.DiscreteTrajectory):
    """Per-step scalar summary rows for the trajectory table."""
    cfg = traj.config
    rows = []
    for k in range(traj.steps + 1):
        y, mu = traj.ys[k], traj.mus[k]
        iters = traj.solver_stats[k - 1].iterations if k > 0 else 0
        rows.append((
            k * traj.h,
            sp.mean(y),
            sp.mean(mu),
            sp.norm(y),
            sp.norm(sp.apply_power(cfg.op_B, y)),
            sp.norm(mu),
            sp.norm(sp.apply_power(cfg.op_A, mu)),
            iters,
        ))
    return rows


def write_trajectory_csv(path, traj: st.DiscreteTrajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in trajectory_rows(traj):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_ledger_tsv(path, entries: List[est.EnergyLedgerEntry]) -> None:
    header = ("step",) + est.LEDGER_TERMS + ("rhs_bound", "slack", "data_bound")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for e in entries:
            cells = [str(e.step)]
            cells += [fmt(e.lhs_terms[name]) for name in est.LEDGER_TERMS]
            cells += [fmt(e.rhs_bound), fmt(e.slack), fmt(e.data_bound)]
            fh.write("\t".join(cells) + "\n")


def write_snapshots_csv(path, traj: st.DiscreteTrajectory, steps, which: str) -> None:
    fields = traj.ys if which == "y" else traj.mus
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        ncols = traj.config.grid.size
        fh.write("t," + ",".join(f"v{i}" for i in range(ncols)) + "\n")
        for k in steps:
            row = [fmt(k * traj.h)] + [fmt(v) for v in fields[k].values]
            fh.write(",".join(row) + "\n")


PLOT_SCRIPT = """\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1200,800
set output 'trajectory.png'
set multiplot layout 2,2
set xlabel 't'
plot 'trajectory.csv' using 1:2 with lines title 'mean y'
plot 'trajectory.csv' using 1:6 with lines title '|mu|'
plot 'trajectory.csv' using 1:5 with lines title '|B^s y|'
plot 'trajectory.csv' using 1:7 with lines title '|A^r mu|'
unset multiplot
set output 'ledger.png'
set datafile separator '\\t'
plot 'ledger.tsv' using 1:11 with lines title 'ledger slack'
"""


def write_run(directory, traj: st.DiscreteTrajectory, run_cfg: cfgmod.RunConfig,
              config_text: str) -> dict:
    """Write the full run directory; returns the metadata dictionary."""
    os.makedirs(directory, exist_ok=True)
    data = traj.data
    write_trajectory_csv(os.path.join(directory, "trajectory.csv"), traj)
    entries = est.gronwall_ledger(traj, data, traj.config)
    write_ledger_tsv(os.path.join(directory, "ledger.tsv"), entries)
    snap_steps = cfgmod.snapshot_steps(run_cfg.snapshots, traj.steps)
    write_snapshots_csv(os.path.join(directory, "snapshots_y.csv"), traj, snap_steps, "y")
    write_snapshots_csv(os.path.join(directory, "snapshots_mu.csv"), traj, snap_steps, "mu")
    report = est.uniform_report(traj, data, traj.config)
    halfway = entries[len(entries) // 2 - 1] if len(entries) >= 2 else None
    plateau = {}
    if halfway is not None:
        final = entries[-1]
        for name in est.LEDGER_TERMS:
            scale = max(abs(final.lhs_terms[name]), est.SLACK_FLOOR)
            plateau[name] = abs(final.lhs_terms[name] - halfway.lhs_terms[name]) / scale
    est_payload = {
        "uniform": report.as_dict(),
        "dual_norm": est.dual_norm_report(traj, traj.config).__dict__,
        "min_slack": min(e.slack for e in entries) if entries else 0.0,
        "halfway_plateau_ratios": plateau,
    }
    write_json(os.path.join(directory, "estimates.json"), est_payload)
    meta = {
        "schema": "fracch-run/1",
        "seed": run_cfg.seed,
        "h": traj.h,
        "steps": traj.steps,
        "snapshot_steps": snap_steps,
        "initial_mean": sp.mean(traj.ys[0]),
        "final_mass_identity_defect": abs(
            sp.mean(traj.ys[-1]) + traj.h * sp.mean(traj.mus[-1]) - sp.mean(traj.ys[0])
        ),
        "y_min": min(float(y.values.min()) for y in traj.ys),
        "y_max": max(float(y.values.max()) for y in traj.ys),
        "newton_iterations_max": max((s.iterations for s in traj.solver_stats), default=0),
    }
    write_json(os.path.join(directory, "meta.json"), meta)
    with open(os.path.join(directory, "config.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_text)
    with open(os.path.join(directory, "plot.gp"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(PLOT_SCRIPT)
    return meta


@dataclass(frozen=True)
class StoredRun:
    """A run directory loaded back into memory.

    Fields are reconstructed from the snapshot tables and the verbatim
    configuration; scalar series come from the trajectory table.  All
    numbers are bit-identical to the ones computed by the fresh run.
    """

    run_config: cfgmod.RunConfig
    scheme: st.SchemeConfig
    data: st.ProblemData
    times: np.ndarray
    columns: dict
    snapshot_steps: List[int]
    y_snapshots: List[sp.Field]
    mu_snapshots: List[sp.Field]

    meta: dict

    @property
    def snapshot_times(self) -> np.ndarray:
        return self.scheme.h * np.array(self.snapshot_steps, dtype=float)


def _read_table(path, sep):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(sep)
        rows = [line.strip().split(sep) for line in fh if line.strip()]
    return header, rows


def load_run(directory) -> StoredRun:
    """Reload a run directory written by :func:`write_run`."""
    cfg_path = os.path.join(directory, "config.ini")
    if not os.path.exists(cfg_path):
        raise ConfigurationError(f"{directory} does not contain a run (no config.ini)")
    run_cfg = cfgmod.load_config(cfg_path)
    scheme, data = cfgmod.build_problem(run_cfg)
    header, rows = _read_table(os.path.join(directory, "trajectory.csv"), ",")
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ConfigurationError("trajectory table has unexpected columns")
    values = np.array([[float(c) for c in row] for row in rows])
    columns = {name: values[:, i] for i, name in enumerate(TRAJECTORY_COLUMNS)}
    grid = scheme.grid

    def read_snaps(name):
        _, srows = _read_table(os.path.join(directory, name), ",")
        steps = []
        fields = []
        for row in srows:
            t = float(row[0])
            steps.append(int(round(t / scheme.h)))
            fields.append(sp.Field(np.array([float(v) for v in row[1:]]), grid))
        return steps, fields

    steps_y, y_snaps = read_snaps("snapshots_y.csv")
    steps_mu, mu_snaps = read_snaps("snapshots_mu.csv")
    if steps_y != steps_mu:
        raise ConfigurationError("snapshot tables disagree on stored steps")
    with open(os.path.join(directory, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return StoredRun(
        run_config=run_cfg,
        scheme=scheme,
        data=data,
        times=columns["t"],
        columns=columns,
        snapshot_steps=steps_y,
        y_snapshots=y_snaps,
        mu_snapshots=mu_snaps,
        meta=meta,
    )


def stored_longtime_report(stored: StoredRun, window_fraction: float = 0.5,
                           overshoot_tol: Optional[float] = None) -> dict:
    """Limit-point analysis of a stored run; the payload of report.json.

    Works entirely from the stored tables so that analyzing a reloaded run
    reproduces the fresh analysis byte for byte.  The spatial flatness of
    the potential is reconstructed from the scalar columns through
    ``|mu - mean|^2 = |mu|^2 - mean^2 * length``.
    """
    scheme, data = stored.scheme, stored.data
    steps = stored.meta["steps"]
    h = scheme.h
    length = scheme.grid.length
    lam1 = scheme.op_A.lambda1
    window_start = int(math.ceil(steps * (1.0 - window_fraction)))
    in_window = [i for i, t in enumerate(stored.times)
                 if int(round(t / h)) >= window_start]
    mean_mu = stored.columns["mean_mu"]
    norm_mu = stored.columns["norm_mu"]
    flatness = np.sqrt(np.maximum(norm_mu**2 - length * mean_mu**2, 0.0))
    gaps = np.zeros((len(stored.y_snapshots),) * 2)
    for i in range(len(stored.y_snapshots)):
        for j in range(i + 1, len(stored.y_snapshots)):
            gaps[i, j] = gaps[j, i] = sp.norm(stored.y_snapshots[i] - stored.y_snapshots[j])
    b_bound = max(sp.norm(sp.apply_power(scheme.op_B, y)) for y in stored.y_snapshots)
    candidate = stored.y_snapshots[-1]
    if lam1 > 0.0:
        branch = "lambda1_positive"
        mu_value = 0.0
        mu_payload = None
    else:
        branch = "lambda1_zero"
        tail = mean_mu[in_window]
        mu_value = float(tail.mean())
        mu_payload = {
            "times": stored.times[in_window],
            "series": tail,
            "tail_average": mu_value,
            "spread": float(tail.max() - tail.min()),
            "flatness_max": float(flatness[in_window].max()),
        }
    dom = scheme.spec.beta_domain
    if overshoot_tol is None:
        exceed = max(0.0, dom.lo - float(candidate.values.min()),
                     float(candidate.values.max()) - dom.hi)
        overshoot_tol = exceed * (1.0 + 1e-9) + 1e-15
    resid = longtime.stationarity_residual(candidate, mu_value, data.u_infinity,
                                           scheme.spec, scheme.op_B, overshoot_tol)
    scale = longtime.residual_scale(candidate, mu_value, data.u_infinity,
                                    scheme.spec, scheme.op_B, overshoot_tol)
    vi_violation = longtime.variational_inequality_check(
        candidate, mu_value, data.u_infinity, scheme.spec, scheme.op_B)
    interval = (dom.lo, dom.hi) if dom.bounded else (stored.meta["y_min"], stored.meta["y_max"])
    overshoot = max(0.0, interval[0] - stored.meta["y_min"],
                    stored.meta["y_max"] - interval[1])
    mass_defect = abs(stored.columns["mean_y"][-1] + h * mean_mu[-1]
                      - stored.columns["mean_y"][0])
    basis_kinds = {scheme.op_A.basis.kind, scheme.op_B.basis.kind}
    density_flag = ("verified_interval_bases" if "matrix" not in basis_kinds
                    else "assumed_for_matrix_basis")
    goodmui = (scheme.spec.smooth_graph
               and dom.lo < stored.meta["y_min"] and stored.meta["y_max"] < dom.hi)
    return {
        "schema": "fracch-longtime/1",
        "branch": branch,
        "window_fraction": window_fraction,
        "probe_times": stored.snapshot_times,
        "cauchy_gaps": gaps,
        "b_sigma_bound": float(b_bound),
        "stationarity_residual": resid,
        "residual_scale": scale,
        "variational_inequality_violation": vi_violation,
        "mu_infinity_value": mu_value,
        "mu_infinity": mu_payload,
        "mass_identity_defect": float(mass_defect),
        "range_certificate": {
            "y_min": stored.meta["y_min"],
            "y_max": stored.meta["y_max"],
            "interval": list(interval),
            "contained": overshoot == 0.0,
            "overshoot": overshoot,
            "yosida_lambda": scheme.yosida_lambda,
        },
        "assumptions": {
            "bounded_density": density_flag,
            "unique_constant_multiplier_certified": goodmui,
        },
    }
