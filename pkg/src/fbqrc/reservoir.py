"""Closed-loop reservoir runs: feedback-modified drive, readouts, trajectory averaging.

Readout channels are numbered ``1 ... 2N+2`` in the order of
:func:`fbqrc.system.observables`: ``Q, P, sx_1, sy_1, ...``.  Row ``k`` of a
:class:`ReadoutSeries` holds the expectations at ``t_{k+1}``, after the
reservoir has been driven by ``f~_k`` for one interval.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import system
from .dynamics import TRACE_DRIFT_LIMIT, MasterEquation, min_eigenvalue
from .errors import ContractViolation, IntegratorError, ReadoutError, TruncationError

log = logging.getLogger(__name__)

DEFAULT_N_FOCK = 15
TRUNCATION_LIMIT = 1e-6
DEFAULT_SME_SUBSTEPS = 200


@dataclass(frozen=True)
class FeedbackConfig:
    """Readout channels (1-based) fed back into the drive with weights ``V``."""

    channels: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))
        if len(self.channels) != len(self.weights):
            raise ContractViolation(
                f"{len(self.channels)} feedback channels but {len(self.weights)} weights"
            )
        if len(set(self.channels)) != len(self.channels):
            raise ContractViolation(f"duplicate feedback channels {self.channels}")
        if any(c < 1 for c in self.channels):
            raise ContractViolation(f"channel indices start at 1, got {self.channels}")
        if not all(math.isfinite(v) for v in self.weights):
            raise ContractViolation(f"feedback weights must be finite, got {self.weights}")

    @classmethod
    def none(cls) -> "FeedbackConfig":
        return cls()

    def with_weights(self, weights) -> "FeedbackConfig":
        return FeedbackConfig(self.channels, tuple(weights))

    def check(self, n_readouts: int) -> None:
        bad = [c for c in self.channels if c > n_readouts]
        if bad:
            raise ContractViolation(f"feedback channels {bad} exceed {n_readouts} readouts")

    @property
    def active(self) -> bool:
        return any(v != 0.0 for v in self.weights)


@dataclass(frozen=True)
class StateDiagnostics:
    """Worst values over all interval boundaries, measured before renormalization."""

    max_trace_drift: float = 0.0
    max_hermiticity: float = 0.0
    min_eigenvalue: float = math.inf
    max_truncation: float = 0.0

    def merge(self, other: "StateDiagnostics") -> "StateDiagnostics":
        return StateDiagnostics(
            max(self.max_trace_drift, other.max_trace_drift),
            max(self.max_hermiticity, other.max_hermiticity),
            min(self.min_eigenvalue, other.min_eigenvalue),
            max(self.max_truncation, other.max_truncation),
        )


@dataclass(frozen=True)
class ReadoutSeries:
    values: np.ndarray = field(repr=False)
    labels: tuple
    source: str
    drive: np.ndarray = field(default=None, repr=False)
    diagnostics: StateDiagnostics = field(default_factory=StateDiagnostics)

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] != len(self.labels):
            raise ContractViolation(f"values shape {v.shape} does not match {len(self.labels)} labels")
        if not np.all(np.isfinite(v)):
            k, n = np.argwhere(~np.isfinite(v))[0]
            raise ReadoutError(f"non-finite readout at step {k}, channel {n + 1}", int(k), int(n + 1))
        spins = v[:, 2:]
        if spins.size and np.max(np.abs(spins)) > 1.0 + 1e-6:
            raise ReadoutError(f"spin readout outside [-1, 1]: {np.max(np.abs(spins))!r}")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def channel(self, n: int) -> np.ndarray:
        return self.values[:, n - 1]


def modified_input(f_k: float, readouts_at_k, feedback: FeedbackConfig) -> float:
    """``f_k + sum_n V_n x_{k n}`` over the feedback channels.

    ``readouts_at_k`` is either the full readout vector (channel ``n`` at
    position ``n - 1``) or a mapping from channel number to value.
    """
    out = float(f_k)
    for n, V in zip(feedback.channels, feedback.weights):
        if isinstance(readouts_at_k, Mapping):
            if n not in readouts_at_k:
                raise ContractViolation(f"readout for feedback channel {n} missing")
            x = readouts_at_k[n]
        else:
            if n > len(readouts_at_k):
                raise ContractViolation(f"readout for feedback channel {n} missing")
            x = readouts_at_k[n - 1]
        out += V * float(x)
    return out


def polynomial_features(readouts) -> np.ndarray:
    """Linear block, then ``x_a x_b`` for ``a <= b`` in lexicographic order."""
    X = np.asarray(getattr(readouts, "values", readouts), dtype=float)
    a, b = np.triu_indices(X.shape[1])
    return np.hstack([X, X[:, a] * X[:, b]])


def n_polynomial_features(n_atom: int) -> int:
    return 2 * n_atom**2 + 7 * n_atom + 5


class Reservoir:
    """Cached generators and observables for one ``(spec, params)`` pair."""

    def __init__(self, spec: system.SystemSpec, params: system.ReservoirParams):
        self.spec = spec
        self.params = params
        H0 = system.hamiltonian_static(spec, params)
        H1 = system.hamiltonian_drive(spec, params.epsilon, 1.0)
        self.collapse_ops = system.collapse_operators(spec, params.kappa)
        self.me = MasterEquation(H0, H1, self.collapse_ops)
        self.labels = tuple(system.readout_labels(spec.n_atom))
        # Tr[O rho] = O^T.ravel() . rho.ravel()
        self.obs_rows = np.array([o.data.T.ravel() for o in system.observables(spec)])
        d = spec.dim
        self._diag = np.arange(d) * (d + 1)
        n_spin = 2**spec.n_atom
        top = np.arange((spec.n_fock - 2) * n_spin, d)
        self._top = top * (d + 1)

    @classmethod
    def build(cls, params: system.ReservoirParams, n_fock: int = DEFAULT_N_FOCK,
              max_dim: int = system.MAX_DIM) -> "Reservoir":
        return cls(system.build_space(params.n_atom, n_fock, max_dim), params)

    @property
    def n_readouts(self) -> int:
        return len(self.labels)

    def readouts(self, v: np.ndarray) -> np.ndarray:
        return (self.obs_rows @ v).real

    def initial_vector(self, rho0=None) -> np.ndarray:
        rho = self.spec.ground_state() if rho0 is None else np.asarray(rho0, dtype=complex)
        if rho.shape != (self.spec.dim, self.spec.dim):
            raise ContractViolation(f"initial state shape {rho.shape} != dim {self.spec.dim}")
        return rho.ravel().copy()

    def settle(self, v: np.ndarray, check_positivity: bool = False) -> tuple[np.ndarray, StateDiagnostics]:
        """Re-Hermitize and renormalize a vectorized state after one interval."""
        d = self.spec.dim
        tr = v[self._diag].real.sum()
        drift = abs(tr - 1.0)
        if not math.isfinite(tr) or drift > TRACE_DRIFT_LIMIT:
            raise IntegratorError(f"trace drifted to {tr!r} within one interval; increase substeps")
        m = v.reshape(d, d)
        herm = float(np.max(np.abs(m - m.conj().T)))
        m = 0.5 * (m + m.conj().T) / tr
        lam = min_eigenvalue(m) if check_positivity else math.inf
        trunc = float(m.ravel()[self._top].real.sum())
        return m.ravel(), StateDiagnostics(drift, herm, lam, trunc)


def _calibration_warning(diag: StateDiagnostics, n_fock: int) -> None:
    if diag.max_truncation > TRUNCATION_LIMIT:
        msg = (f"top two Fock levels reached population {diag.max_truncation:.2e} "
               f"(limit {TRUNCATION_LIMIT:g}); n_fock={n_fock} may be too small")
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def _as_reservoir(spec_or_res, params) -> Reservoir:
    if isinstance(spec_or_res, Reservoir):
        return spec_or_res
    return Reservoir(spec_or_res, params)


def run_deterministic(spec, params, input_series, feedback: FeedbackConfig | None = None,
                      dt: float = 1.0, substeps: int | None = None, rho0=None,
                      check_positivity: bool = False, method: str = "auto",
                      max_truncation: float | None = None) -> ReadoutSeries:
    """Closed-loop master-equation run; returns the ``L x (2N+2)`` readouts.

    ``spec`` may be a prebuilt :class:`Reservoir`, in which case ``params``
    is ignored.  ``substeps`` is a floor on the RK4 substeps per interval.
    With ``max_truncation`` set, the run stops with :class:`TruncationError`
    as soon as the top two Fock levels hold more population than that.
    """
    res = _as_reservoir(spec, params)
    feedback = feedback or FeedbackConfig.none()
    feedback.check(res.n_readouts)
    f = np.asarray(input_series, dtype=float).ravel()
    if f.size < 1:
        raise ContractViolation("input series is empty")

    v = res.initial_vector(rho0)
    x = res.readouts(v)
    out = np.empty((f.size, res.n_readouts))
    drive = np.empty(f.size)
    diag = StateDiagnostics()
    for k, fk in enumerate(f):
        ft = modified_input(fk, x, feedback)
        if not math.isfinite(ft):
            raise ReadoutError(f"drive became non-finite at step {k}", k, None)
        drive[k] = ft
        v = res.me.propagate(v, ft, dt, substeps=substeps, method=method)
        v, d_k = res.settle(v, check_positivity)
        diag = diag.merge(d_k)
        if max_truncation is not None and d_k.max_truncation > max_truncation:
            raise TruncationError(
                f"top Fock levels reached {d_k.max_truncation:.2e} at step {k} "
                f"(limit {max_truncation:g}, n_fock={res.spec.n_fock})", k, None)
        x = res.readouts(v)
        if not np.all(np.isfinite(x)):
            n = int(np.argmax(~np.isfinite(x)))
            raise ReadoutError(f"non-finite readout at step {k}, channel {n + 1}", k, n + 1)
        out[k] = x
    _calibration_warning(diag, res.spec.n_fock)
    return ReadoutSeries(out, res.labels, "deterministic", drive, diag)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` (0-based), schedule independent."""
    return np.random.default_rng([int(seed), int(index)])


def run_trajectory(res: Reservoir, drive, dt: float, substeps: int, rng: np.random.Generator,
                   rho0=None, check_positivity: bool = False, scheme: str = "kraus"):
    """One conditional trajectory under a fixed drive series.

    Returns ``(readouts L x R, diagnostics)`` with row ``k`` the conditional
    expectations at ``t_{k+1}``.
    """
    v = res.initial_vector(rho0)
    n_ch = 2 * len(res.collapse_ops)
    out = np.empty((len(drive), res.n_readouts))
    diag = StateDiagnostics()
    for k, ft in enumerate(drive):
        n = res.me.stochastic_substeps(ft, dt, substeps, scheme)
        dw = rng.normal(0.0, math.sqrt(dt / n), size=(n, n_ch))
        res.me.stochastic_interval(v, ft, dw, dt, scheme)
        v, d_k = res.settle(v, check_positivity)
        diag = diag.merge(d_k)
        out[k] = res.readouts(v)
    return out, diag


def run_trajectory_protocol(spec, params, input_series, feedback: FeedbackConfig | None,
                            M_total: int, rng_seed: int, dt: float = 1.0,
                            substeps: int = DEFAULT_SME_SUBSTEPS, rho0=None,
                            check_positivity: bool = False, keep_trajectories: bool = False,
                            scheme: str = "kraus"):
    """Sequential trajectory feedback protocol; returns the mean readout series.

    Trajectory ``M`` is driven by ``f_k + sum_n V_n xbar_{k n}`` where
    ``xbar`` is the mean readout of trajectories ``1 ... M-1`` (no feedback
    term for ``M = 1``).  The readout at ``t_0`` is the initial-state value.
    With ``keep_trajectories`` the per-trajectory readouts are returned too.
    """
    if M_total < 1:
        raise ContractViolation(f"M_total must be >= 1, got {M_total}")
    res = _as_reservoir(spec, params)
    feedback = feedback or FeedbackConfig.none()
    feedback.check(res.n_readouts)
    f = np.asarray(input_series, dtype=float).ravel()
    x0 = res.readouts(res.initial_vector(rho0))

    total = np.zeros((f.size, res.n_readouts))
    kept = [] if keep_trajectories else None
    diag = StateDiagnostics()
    for m in range(M_total):
        if m == 0 or not feedback.active:
            drive = f.copy()
        else:
            mean = total / m
            prev = np.vstack([x0[None, :], mean[:-1]])
            drive = f + sum(V * prev[:, n - 1] for n, V in zip(feedback.channels, feedback.weights))
        traj, d_m = run_trajectory(res, drive, dt, substeps, trajectory_rng(rng_seed, m), rho0,
                                   check_positivity, scheme)
        diag = diag.merge(d_m)
        total += traj
        if kept is not None:
            kept.append(traj)
    _calibration_warning(diag, res.spec.n_fock)
    series = ReadoutSeries(total / M_total, res.labels, f"trajectory-average({M_total})", None, diag)
    if keep_trajectories:
        return series, np.stack(kept)
    return series
