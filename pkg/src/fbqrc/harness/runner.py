"""Experiment orchestration: task, reservoir, optional V training, readout fit, scoring."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import esn, optimize, regression
from ..errors import FbqrcError
from ..reservoir import (FeedbackConfig, Reservoir, polynomial_features, run_deterministic,
                         run_trajectory_protocol)
from .config import ExperimentConfig
from .emit import emit_csv, emit_svg, emit_traces_csv

log = logging.getLogger(__name__)

# Fig. 3(a) detuning ladders (g_i = 30) and Fig. 3(b) coupling ladders (omega_i = 20)
OMEGA_LADDER = {1: (20.0,), 2: (0.0, 40.0), 3: (0.0, 20.0, 40.0), 4: (0.0, 10.0, 30.0, 40.0),
                5: (0.0, 10.0, 20.0, 30.0, 40.0)}
G_LADDER = {1: (30.0,), 2: (10.0, 50.0), 3: (10.0, 30.0, 50.0), 4: (10.0, 20.0, 40.0, 50.0),
            5: (10.0, 20.0, 30.0, 40.0, 50.0)}

# Fig. 3(c): the measured atom (omega 20, g 30) first, unmeasured atoms after it
UNMEASURED_OMEGA = (20.0, 0.0, 40.0, 10.0, 30.0)

AXES = ("atoms", "atoms-g", "unmeasured", "delay", "kappa", "nss", "trajectories", "weight",
        "esn_size")


class ExperimentError(FbqrcError):
    """A module error annotated with the experiment that raised it."""

    def __init__(self, config_id: str, cause: Exception):
        super().__init__(f"[{config_id}] {type(cause).__name__}: {cause}")
        self.config_id = config_id
        self.cause = cause


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def nrmse(self, segment: str = "test", config_id: str | None = None) -> float:
        for row in self.rows:
            if row["segment"] == segment and (config_id is None or row["config_id"] == config_id):
                return row["nrmse"]
        raise KeyError(f"no {segment!r} row for {config_id!r}")

    def extend(self, other: "ResultTable") -> None:
        self.rows += other.rows
        self.failures += other.failures


def _features(regression_config, series) -> np.ndarray:
    X = series.values
    if regression_config.readouts:
        X = X[:, [c - 1 for c in regression_config.readouts]]
    return polynomial_features(X) if regression_config.mode == "polynomial" else X


def train_feedback(config: ExperimentConfig, reservoir: Reservoir, task, method: str | None = None,
                   seed: int = 0) -> optimize.OptimizerReport:
    fb = config.feedback
    method = method or fb.optimizer
    ctx = optimize.ExperimentContext(reservoir, task, fb.channels, config.regression.mode,
                                     config.regression.delta, config.reservoir.substeps,
                                     config.regression.readouts, fb.max_truncation)
    bounds = tuple(fb.bounds)
    if method == "brute":
        return optimize.brute_force(ctx, bounds, fb.step)
    if method == "brute-nm":
        return optimize.brute_force_nelder_mead(ctx, bounds, fb.step, maxfev=fb.nm_maxfev)
    if method == "de":
        return optimize.differential_evolution(ctx, bounds, fb.maxiter, fb.batches, seed)
    raise ValueError(f"unknown optimizer {method!r}")


def run_experiment(config: ExperimentConfig, seed: int | None = None, method: str | None = None,
                   config_id: str | None = None) -> ResultTable:
    """Generate the task, run the reservoir, fit on train, score train and test.

    ``seed`` overrides the trajectory seed (and the DE seed); ``method``
    overrides the feedback optimizer.
    """
    config_id = config_id or config.name
    seed = config.trajectories.seed if seed is None else seed
    start = time.perf_counter()
    try:
        table = _run(config, seed, method, config_id)
    except FbqrcError as exc:
        raise ExperimentError(config_id, exc) from exc
    wall = time.perf_counter() - start
    for row in table.rows:
        row["wall_time"] = wall
    out = config.output.out_dir
    if out:
        write_outputs(table, config, Path(out), config_id)
    return table


def _run(config, seed, method, config_id) -> ResultTable:
    task = config.task.build()
    rc = config.reservoir
    res = Reservoir.build(rc.params(), rc.n_fock)
    fb = config.feedback
    meta = {"config_id": config_id, "n_fock": rc.n_fock, "dim": res.spec.dim}

    weights = fb.weights
    chosen = method or fb.optimizer
    if chosen != "none" and fb.channels:
        report = train_feedback(config, res, task, chosen, seed)
        weights = tuple(float(v) for v in report.best_V)
        meta.update(optimizer=report.method, n_evals=report.n_evals,
                    train_objective=report.best_nrmse, batches=_jsonable(report.batches))
    feedback = FeedbackConfig(fb.channels, weights)
    meta["V"] = list(weights)
    meta["channels"] = list(fb.channels)

    tc = config.trajectories
    if tc.mode == "deterministic":
        series = run_deterministic(res, None, task.inputs, feedback, dt=task.dt,
                                   substeps=rc.substeps)
    else:
        series = run_trajectory_protocol(res, None, task.inputs, feedback, tc.count, seed,
                                         dt=task.dt, substeps=tc.substeps)
    meta["source"] = series.source
    meta["max_truncation"] = series.diagnostics.max_truncation

    X = _features(config.regression, series)
    model = regression.fit(X[task.train], task.targets[task.train], config.regression.delta,
                           config.regression.mode)
    table = ResultTable(meta=meta)
    for segment, sl in (("train", task.train), ("test", task.test)):
        y = regression.predict(model, X[sl])
        table.rows.append({"config_id": config_id, "segment": segment,
                           "nrmse": regression.nrmse(y, task.targets[sl]), "wall_time": 0.0,
                           "seed": seed})
        table.traces[segment] = (np.arange(sl.start, sl.stop), y, task.targets[sl])
    return table


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.floating):
        return float(x)
    return x


def write_outputs(table: ResultTable, config: ExperimentConfig, out: Path, stem: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    safe = "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in stem)
    emit_csv(table, out / f"{safe}.csv")
    if table.traces:
        emit_traces_csv(table, out / f"{safe}_traces.csv")
        if config.output.svg and "test" in table.traces:
            k, y, target = table.traces["test"]
            emit_svg({"actual": (k, y), "target": (k, target)}, out / f"{safe}_test.svg",
                     title=f"{stem}: test segment", xlabel="k", ylabel="output")
    meta = {k: v for k, v in table.meta.items()}
    (out / f"{safe}_meta.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True))


def sweep_config(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """Config for one sweep point, with caption parameter sets for atom counts."""
    if axis == "atoms":
        n = int(value)
        return config.replace(reservoir={"omega_i": OMEGA_LADDER[n], "g_i": (30.0,) * n})
    if axis == "atoms-g":
        n = int(value)
        return config.replace(reservoir={"omega_i": (20.0,) * n, "g_i": G_LADDER[n]})
    if axis == "unmeasured":
        n = int(value) + 1
        return config.replace(reservoir={"omega_i": UNMEASURED_OMEGA[:n], "g_i": (30.0,) * n},
                              regression={"readouts": (1, 2, 3, 4)})
    if axis == "weight":
        fb = config.feedback
        if len(fb.channels) != 1:
            raise ValueError("the weight axis needs exactly one feedback channel")
        return config.replace(feedback={"weights": (float(value),), "optimizer": "none"})
    if axis == "delay":
        return config.replace(task={"delay": int(value)})
    if axis == "kappa":
        return config.replace(reservoir={"kappa": float(value)})
    if axis == "nss":
        return config.replace(task={"n_ss": int(value)})
    if axis == "trajectories":
        return config.replace(trajectories={"mode": "trajectories", "count": int(value)})
    if axis == "esn_size":
        return config.replace(esn={"n_neuron": int(value)})
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")


def run_esn(config: ExperimentConfig, config_id: str | None = None) -> ResultTable:
    config_id = config_id or config.name
    ec = config.esn
    start = time.perf_counter()
    task = config.task.build()
    stats = esn.esn_ensemble_eval(task, ec.n_neuron, ec.n_measured, ec.diagonal_only,
                                  ec.n_networks, config.regression.delta, ec.seed)
    wall = time.perf_counter() - start
    table = ResultTable(meta={"config_id": config_id, **dataclasses.asdict(ec),
                              "mean": stats.mean, "stderr": stats.stderr, "min": stats.min,
                              "max": stats.max, "n_ok": stats.n_ok, "n_failed": stats.n_failed})
    for segment, value in (("test-mean", stats.mean), ("test-min", stats.min),
                           ("test-max", stats.max)):
        table.rows.append({"config_id": config_id, "segment": segment, "nrmse": value,
                           "wall_time": wall, "seed": ec.seed})
    return table


def run_sweep(config: ExperimentConfig, axis: str, values, seed: int | None = None) -> ResultTable:
    """One experiment per axis value; failures are recorded and the sweep continues."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")
    combined = ResultTable(meta={"axis": axis, "values": list(values)})
    quiet = dataclasses.replace(config, output=dataclasses.replace(config.output, out_dir=None))
    for value in values:
        cid = f"{config.name}[{axis}={value}]"
        try:
            point = sweep_config(quiet, axis, value)
            table = run_esn(point, cid) if axis == "esn_size" else run_experiment(point, seed,
                                                                                 config_id=cid)
        except Exception as exc:  # a failed point must not stop the sweep
            log.error("sweep point %s failed: %s", cid, exc)
            combined.failures.append({"config_id": cid, "value": value, "error": str(exc)})
            continue
        combined.extend(table)
    out = config.output.out_dir
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{config.name}_sweep_{axis}"
        emit_csv(combined, out / f"{stem}.csv")
        if combined.failures:
            (out / f"{stem}_failures.json").write_text(json.dumps(combined.failures, indent=2))
        if config.output.svg:
            seg = "test-mean" if axis == "esn_size" else "test"
            xs, ys = [], []
            for value in values:
                cid = f"{config.name}[{axis}={value}]"
                try:
                    ys.append(combined.nrmse(seg, cid))
                    xs.append(float(value))
                except KeyError:
                    pass
            emit_svg({f"{seg} NRMSE": (xs, ys)}, out / f"{stem}.svg", title=stem, xlabel=axis,
                     ylabel="NRMSE", markers=True)
    return combined
