"""Ridge-regularized linear readout and NRMSE scoring."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DegenerateTargetError

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-10
# reciprocal condition number below which the Cholesky path is abandoned
_RCOND_FLOOR = 1e-15


@dataclass(frozen=True)
class RegressionModel:
    """Output weights with the bias weight first."""

    weights: np.ndarray = field(repr=False)
    delta: float = DEFAULT_DELTA
    mode: str = "linear"

    def __post_init__(self):
        if not self.delta > 0:
            raise ContractViolation(f"ridge delta must be positive, got {self.delta}")
        if self.mode not in ("linear", "polynomial"):
            raise ContractViolation(f"unknown feature mode {self.mode!r}")

    @property
    def n_features(self) -> int:
        return self.weights.size - 1


def design_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([np.ones((X.shape[0], 1)), X])


def fit(features, targets, delta: float = DEFAULT_DELTA, mode: str = "linear") -> RegressionModel:
    """Solve ``(X^T X + delta I) W = X^T y`` with ``X = [1 | features]``."""
    X = design_matrix(features)
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.size:
        raise ContractViolation(f"{X.shape[0]} feature rows but {y.size} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ContractViolation("features or targets contain non-finite values")
    if not delta > 0:
        raise ContractViolation(f"ridge delta must be positive, got {delta}")

    A = X.T @ X
    A[np.diag_indices_from(A)] += delta
    b = X.T @ y
    try:
        factor = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
        diag = np.abs(np.diag(factor[0]))
        if diag.min() ** 2 < _RCOND_FLOOR * diag.max() ** 2:
            raise np.linalg.LinAlgError("normal matrix numerically singular")
        W = scipy.linalg.cho_solve(factor, b, check_finite=False)
    except np.linalg.LinAlgError as exc:
        warnings.warn(f"ridge normal equations ill-conditioned ({exc}); using lstsq", RuntimeWarning)
        # same minimizer written as an augmented least-squares problem
        aug = np.vstack([X, np.sqrt(delta) * np.eye(X.shape[1])])
        rhs = np.concatenate([y, np.zeros(X.shape[1])])
        W = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    return RegressionModel(W, delta, mode)


def predict(model: RegressionModel, features) -> np.ndarray:
    X = design_matrix(features)
    if X.shape[1] != model.weights.size:
        raise ContractViolation(
            f"model expects {model.n_features} features, got {X.shape[1] - 1}"
        )
    return X @ model.weights


def ridge_loss(model_or_weights, features, targets, delta: float | None = None) -> float:
    W = getattr(model_or_weights, "weights", model_or_weights)
    if delta is None:
        delta = getattr(model_or_weights, "delta", DEFAULT_DELTA)
    r = design_matrix(features) @ W - np.asarray(targets, dtype=float)
    return float(r @ r + delta * (W @ W))


def nrmse(y, y_bar) -> float:
    """RMS error divided by the range of ``y_bar`` over the same segment."""
    y = np.asarray(y, dtype=float).ravel()
    y_bar = np.asarray(y_bar, dtype=float).ravel()
    if y.size != y_bar.size or y.size < 2:
        raise ContractViolation(f"need equal lengths >= 2, got {y.size} and {y_bar.size}")
    span = y_bar.max() - y_bar.min()
    if not span > 0:
        raise DegenerateTargetError("target segment is constant")
    return float(np.sqrt(np.mean((y - y_bar) ** 2)) / span)
