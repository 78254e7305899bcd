"""Classical echo-state-network baseline, ``x_{k+1} = ReLU(A x_k + B u_k)``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import regression
from .errors import ContractViolation, DegenerateTargetError
from .tasks import TaskDataset

log = logging.getLogger(__name__)

RESCALE_TARGET = 0.99


@dataclass(frozen=True)
class EsnSpec:
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    n_measured: int
    diagonal_only: bool
    seed: int

    @property
    def n_neuron(self) -> int:
        return self.B.size

    @property
    def sigma_max(self) -> float:
        return float(np.linalg.norm(self.A, 2))


def esn_random(n_neuron: int, n_measured: int | None = None, diagonal_only: bool = False,
               seed: int = 0) -> EsnSpec:
    """Uniform ``[-1, 1]`` entries; ``A`` rescaled to ``0.99 / sigma_max`` only if needed."""
    n_measured = n_neuron if n_measured is None else n_measured
    if not 1 <= n_measured <= n_neuron:
        raise ContractViolation(f"need 1 <= n_measured <= n_neuron, got {n_measured}, {n_neuron}")
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(n_neuron, n_neuron))
    B = rng.uniform(-1.0, 1.0, size=n_neuron)
    if diagonal_only:
        A = np.diag(np.diag(A))
    smax = np.linalg.norm(A, 2)
    if smax >= 1.0:
        A = A * (RESCALE_TARGET / smax)
    return EsnSpec(A, B, n_measured, diagonal_only, seed)


def esn_run(spec: EsnSpec, inputs, x0=None) -> np.ndarray:
    """States ``x_1 ... x_L`` as an ``L x n_neuron`` array, starting from ``x_0 = 0``."""
    u = np.asarray(inputs, dtype=float).ravel()
    x = np.zeros(spec.n_neuron) if x0 is None else np.array(x0, dtype=float)
    out = np.empty((u.size, spec.n_neuron))
    for k, uk in enumerate(u):
        x = np.maximum(spec.A @ x + spec.B * uk, 0.0)
        out[k] = x
    return out


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    stderr: float
    min: float
    max: float
    n_ok: int
    n_failed: int
    scores: np.ndarray = field(repr=False)


def esn_score(spec: EsnSpec, task: TaskDataset, delta: float = regression.DEFAULT_DELTA) -> float:
    """Test NRMSE of a linear readout on the measured neurons."""
    X = esn_run(spec, task.inputs)[:, : spec.n_measured]
    model = regression.fit(X[task.train], task.targets[task.train], delta)
    return regression.nrmse(regression.predict(model, X[task.test]), task.targets[task.test])


def esn_ensemble_eval(task: TaskDataset, n_neuron: int, n_measured: int | None = None,
                      diagonal_only: bool = False, n_networks: int = 100,
                      delta: float = regression.DEFAULT_DELTA, seed: int = 0) -> EnsembleStats:
    """Test-NRMSE statistics over ``n_networks`` random networks.

    Network ``j`` uses seed ``seed + j`` so results do not depend on ordering.
    """
    if n_networks < 1:
        raise ContractViolation(f"n_networks must be >= 1, got {n_networks}")
    scores, failed = [], 0
    for j in range(n_networks):
        spec = esn_random(n_neuron, n_measured, diagonal_only, seed + j)
        try:
            s = esn_score(spec, task, delta)
        except (ContractViolation, DegenerateTargetError) as exc:
            log.warning("network %d excluded: %s", j, exc)
            failed += 1
            continue
        if not np.isfinite(s):
            log.warning("network %d excluded: non-finite NRMSE", j)
            failed += 1
            continue
        scores.append(s)
    if not scores:
        raise ContractViolation("every network in the ensemble failed")
    arr = np.array(scores)
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return EnsembleStats(float(arr.mean()), stderr, float(arr.min()), float(arr.max()),
                         arr.size, failed, arr)
