"""CSV/JSON serialization for trajectories, observations, and results.

All CSV files carry a header row, comma delimiters, and floats printed
with 17 significant digits so that parsing them back recovers the exact
double-precision values.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .estimate import ObservationMeta, ObservationSet, EstimationResult
from .model import Trajectory
from .noise import TimeGrid
from .reduced import SlowTrajectory


def fmt(value: float) -> str:
    """Full-precision, round-trippable float formatting."""
    return format(float(value), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    """Trajectory CSV: ``t,x_1..x_n,y_1..y_m``, one row per node."""
    n = traj.slow.shape[1]
    m = traj.fast.shape[1]
    header = "t," + ",".join(f"x_{i + 1}" for i in range(n)) + "," + ",".join(
        f"y_{j + 1}" for j in range(m)
    )
    t = traj.grid.nodes()
    rows = (
        [t[k], *traj.slow[k], *traj.fast[k]] for k in range(t.size)
    )
    return _write_rows(path, header, rows)


def write_slow_trajectory_csv(traj: SlowTrajectory, path,
                              manifold_values=None) -> Path:
    """Slow trajectory CSV; optionally appends manifold evaluations as y_1."""
    t = traj.grid.nodes()
    if manifold_values is None:
        header = "t,x_1"
        rows = ([t[k], traj.states[k, 0]] for k in range(t.size))
    else:
        header = "t,x_1,y_1"
        mv = np.asarray(manifold_values, dtype=np.float64)
        rows = ([t[k], traj.states[k, 0], mv[k]] for k in range(t.size))
    return _write_rows(path, header, rows)


def write_curve_csv(xi, values, path) -> Path:
    """Manifold curve CSV: ``xi,h_value``."""
    xi = np.asarray(xi, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    return _write_rows(path, "xi,h_value", zip(xi, values))


def write_distance_csv(times, distances, path) -> Path:
    """Attraction-distance CSV: ``t,distance``."""
    return _write_rows(path, "t,distance", zip(times, distances))


def write_grid_csv(a_values, objective_values, path) -> Path:
    """Objective landscape CSV: ``a,objective``."""
    return _write_rows(path, "a,objective", zip(a_values, objective_values))


# ---------------------------------------------------------------------------
# observations


def write_observations(obs: ObservationSet, stem) -> tuple[Path, Path]:
    """Write a metadata JSON plus a data CSV ``t,sample,x[,y]``."""
    stem = Path(stem)
    data_path = stem.with_suffix(".csv")
    meta_path = stem.with_suffix(".json")
    has_fast = obs.y_ob is not None
    header = "t,sample,x,y" if has_fast else "t,sample,x"
    with data_path.open("w", newline="") as fh:
        fh.write(header + "\n")
        for i, t in enumerate(obs.times):
            for j in range(obs.n_samples):
                row = [fmt(t), str(j), fmt(obs.x_ob[i, j])]
                if has_fast:
                    row.append(fmt(obs.y_ob[i, j]))
                fh.write(",".join(row) + "\n")
    meta = {
        "a_true": obs.meta.a_true,
        "eps": obs.meta.eps,
        "sigma": obs.meta.sigma,
        "slow_rate": obs.meta.slow_rate,
        "coupling": obs.meta.coupling,
        "dt": obs.meta.dt,
        "seed": obs.meta.seed,
        "x0": obs.meta.x0,
        "y0": obs.meta.y0,
        "n_times": int(obs.n_times),
        "n_samples": int(obs.n_samples),
        "include_fast": has_fast,
        "times": [float(t) for t in obs.times],
        "data_file": data_path.name,
    }
    with meta_path.open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path, data_path


def read_observations(meta_path) -> ObservationSet:
    """Parse the files written by :func:`write_observations`."""
    meta_path = Path(meta_path)
    with meta_path.open() as fh:
        meta = json.load(fh)
    data_path = meta_path.parent / meta["data_file"]
    times = np.asarray(meta["times"], dtype=np.float64)
    n_i, n_j = meta["n_times"], meta["n_samples"]
    x_ob = np.empty((n_i, n_j))
    y_ob = np.empty((n_i, n_j)) if meta["include_fast"] else None
    with data_path.open() as fh:
        header = fh.readline().strip().split(",")
        want = ["t", "sample", "x", "y"] if meta["include_fast"] else ["t", "sample", "x"]
        if header != want:
            raise ConfigurationError(f"unexpected observation header {header}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            t = float(parts[0])
            j = int(parts[1])
            i = int(np.argmin(np.abs(times - t)))
            x_ob[i, j] = float(parts[2])
            if y_ob is not None:
                y_ob[i, j] = float(parts[3])
    return ObservationSet(
        times=times,
        x_ob=x_ob,
        y_ob=y_ob,
        meta=ObservationMeta(
            a_true=meta["a_true"], eps=meta["eps"], sigma=meta["sigma"],
            slow_rate=meta["slow_rate"], coupling=meta["coupling"],
            dt=meta["dt"], seed=meta["seed"], x0=meta["x0"], y0=meta["y0"],
        ),
    )


# ---------------------------------------------------------------------------
# estimation results


def estimation_result_dict(result: EstimationResult, config_echo=None) -> dict:
    out = {
        "estimator": result.estimator,
        "best_objective": result.best_objective,
        "termination": result.termination,
        "iterations": result.iterations,
        "n_evaluations": result.n_evaluations,
        "meta": result.meta,
        "trace": [
            {
                "iteration": e.iteration,
                "best_a": e.best_point[0] if len(e.best_point) == 1 else list(e.best_point),
                "best_objective": e.best_value,
            }
            for e in result.trace
        ],
    }
    if config_echo is not None:
        out["config"] = config_echo
    return out


def write_estimation_result(result: EstimationResult, stem,
                            config_echo=None) -> tuple[Path, Path]:
    """Write ``<stem>.json`` plus the ``iter,best_a,best_objective`` trace CSV."""
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    trace_path = stem.parent / (stem.name + "_trace.csv")
    with json_path.open("w") as fh:
        json.dump(estimation_result_dict(result, config_echo), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    rows = (
        [e.iteration, e.best_point[0], e.best_value] for e in result.trace
    )
    _write_rows(trace_path, "iter,best_a,best_objective", rows)
    return json_path, trace_path
