"""Global search for feedback weights ``V`` with training NRMSE as the objective."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.optimize

from . import regression
from .errors import ContractViolation, ReadoutError
from .reservoir import FeedbackConfig, Reservoir, polynomial_features, run_deterministic
from .tasks import TaskDataset

log = logging.getLogger(__name__)

SENTINEL = 1e6
DEFAULT_BOUNDS = (-3.0, 3.0)
MAX_GRID_DIM = 4


@dataclass
class ExperimentContext:
    """Everything the objective needs besides ``V``.

    Only the fade and training segments are simulated, so an evaluation
    never touches test data.  ``max_truncation`` rejects feedback weights
    that push population into the top Fock levels: such points score the
    sentinel instead of an NRMSE that depends on the cutoff.
    """

    reservoir: Reservoir
    task: TaskDataset
    channels: tuple
    mode: str = "linear"
    delta: float = regression.DEFAULT_DELTA
    substeps: int | None = None
    readout_channels: tuple = ()
    max_truncation: float | None = None
    check_positivity: bool = False

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.readout_channels = tuple(int(c) for c in self.readout_channels)
        FeedbackConfig(self.channels, (0.0,) * len(self.channels)).check(self.reservoir.n_readouts)
        if self.mode not in ("linear", "polynomial"):
            raise ContractViolation(f"unknown regression mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return len(self.channels)

    def features(self, readouts) -> np.ndarray:
        X = readouts.values
        if self.readout_channels:
            X = X[:, [c - 1 for c in self.readout_channels]]
        return polynomial_features(X) if self.mode == "polynomial" else X

    def readouts(self, V, length: int | None = None):
        fb = FeedbackConfig(self.channels, tuple(V))
        f = self.task.inputs if length is None else self.task.inputs[:length]
        return run_deterministic(self.reservoir, None, f, fb, dt=self.task.dt, substeps=self.substeps,
                                 check_positivity=self.check_positivity,
                                 max_truncation=self.max_truncation)

    def __call__(self, V) -> float:
        return objective(V, self)


def objective(V, context: ExperimentContext) -> float:
    """Training NRMSE after fitting the readout for feedback weights ``V``."""
    V = np.atleast_1d(np.asarray(V, dtype=float))
    if V.shape != (context.dim,):
        raise ContractViolation(f"expected {context.dim} feedback weights, got {V.shape}")
    task = context.task
    try:
        series = context.readouts(V, task.train_end)
        X = context.features(series)[task.train]
        model = regression.fit(X, task.targets[task.train], context.delta, context.mode)
        value = regression.nrmse(regression.predict(model, X), task.targets[task.train])
    except ReadoutError as exc:
        log.warning("V=%s: %s; objective set to %g", V.tolist(), exc, SENTINEL)
        return SENTINEL
    if not math.isfinite(value):
        log.warning("V=%s: non-finite NRMSE; objective set to %g", V.tolist(), SENTINEL)
        return SENTINEL
    return value


@dataclass(frozen=True)
class FunctionObjective:
    """Adapter for plain callables ``fn(V) -> float`` of fixed dimension."""

    fn: Callable
    dim: int

    def __call__(self, V) -> float:
        return float(self.fn(np.asarray(V, dtype=float)))


@dataclass
class OptimizerReport:
    best_V: np.ndarray
    best_nrmse: float
    method: str
    log: list = field(default_factory=list, repr=False)
    batches: list = field(default_factory=list)

    @property
    def n_evals(self) -> int:
        return len(self.log)


class _Recorder:
    """Evaluates, clips into bounds, replaces non-finite values and logs every call."""

    def __init__(self, fn, lo, hi):
        self.fn, self.lo, self.hi = fn, lo, hi
        self.log: list = []

    def __call__(self, V) -> float:
        V = np.clip(np.asarray(V, dtype=float), self.lo, self.hi)
        value = float(self.fn(V))
        if not math.isfinite(value):
            log.warning("V=%s: non-finite objective; set to %g", V.tolist(), SENTINEL)
            value = SENTINEL
        self.log.append((V.copy(), value))
        return value


def _bounds(context, bounds):
    lo, hi = np.broadcast_arrays(*[np.asarray(b, dtype=float) for b in zip(*np.atleast_2d(bounds))])
    lo = np.broadcast_to(lo.ravel(), (context.dim,)).astype(float)
    hi = np.broadcast_to(hi.ravel(), (context.dim,)).astype(float)
    if np.any(lo >= hi):
        raise ContractViolation(f"empty bounds {bounds}")
    return lo, hi


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def brute_force(context, bounds=DEFAULT_BOUNDS, step: float = 0.5) -> OptimizerReport:
    """Full grid search; ties go to the lexicographically smallest ``V``."""
    if context.dim < 1:
        raise ContractViolation("need at least one feedback dimension")
    if context.dim > MAX_GRID_DIM:
        raise ContractViolation(
            f"grid search over {context.dim} dimensions refused; use differential_evolution"
        )
    lo, hi = _bounds(context, bounds)
    rec = _Recorder(context, lo, hi)
    axes = [grid_axis(a, b, step) for a, b in zip(lo, hi)]
    best_V, best = None, math.inf
    for point in itertools.product(*axes):
        value = rec(point)
        if value < best:
            best_V, best = np.array(point), value
    return OptimizerReport(best_V, best, "brute", rec.log)


def brute_force_nelder_mead(context, bounds=DEFAULT_BOUNDS, step: float = 0.5,
                            xatol: float = 1e-5, fatol: float = 1e-9,
                            maxfev: int | None = None) -> OptimizerReport:
    """Grid search followed by bounded Nelder-Mead from the grid argmin."""
    grid = brute_force(context, bounds, step)
    lo, hi = _bounds(context, bounds)
    rec = _Recorder(context, lo, hi)
    x0 = grid.best_V
    # initial simplex spans half a grid cell, pointing inward at the bounds
    simplex = [x0]
    for i in range(context.dim):
        x = x0.copy()
        x[i] = x[i] + step / 2 if x[i] + step / 2 <= hi[i] else x[i] - step / 2
        simplex.append(x)
    res = scipy.optimize.minimize(
        rec, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
        options={"initial_simplex": np.array(simplex), "xatol": xatol, "fatol": fatol,
                 "maxfev": maxfev},
    )
    full_log = grid.log + rec.log
    nm_V, nm_best = min(rec.log, key=lambda e: e[1]) if rec.log else (x0, math.inf)
    log.info("Nelder-Mead: %s after %d evaluations", res.message, len(rec.log))
    if nm_best < grid.best_nrmse:
        return OptimizerReport(nm_V, nm_best, "brute-nm", full_log)
    return OptimizerReport(grid.best_V, grid.best_nrmse, "brute-nm", full_log)


def differential_evolution(context, bounds=DEFAULT_BOUNDS, maxiter: int = 1000, batches: int = 3,
                           seed: int = 0, popsize: int = 15, mutation: float = 0.5,
                           recombination: float = 0.7, tol: float = 0.01) -> OptimizerReport:
    """DE/rand/1/bin, ``batches`` independent runs seeded ``seed, seed+1, ...``."""
    if batches < 1:
        raise ContractViolation(f"batches must be >= 1, got {batches}")
    lo, hi = _bounds(context, bounds)
    full_log, summary = [], []
    best_V, best = None, math.inf
    for b in range(batches):
        rec = _Recorder(context, lo, hi)
        scipy.optimize.differential_evolution(
            rec, list(zip(lo, hi)), strategy="rand1bin", maxiter=maxiter, popsize=popsize,
            mutation=mutation, recombination=recombination, tol=tol, seed=seed + b,
            polish=False, init="latinhypercube", updating="immediate",
        )
        V, value = min(rec.log, key=lambda e: e[1])
        summary.append({"seed": seed + b, "best_V": V, "best_nrmse": value, "n_evals": len(rec.log)})
        full_log += rec.log
        if value < best:
            best_V, best = V, value
    return OptimizerReport(best_V, best, "de", full_log, summary)
