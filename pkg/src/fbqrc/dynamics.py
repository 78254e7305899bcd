"""Deterministic Lindblad and Ito stochastic master equations.

Both equations use the dissipator convention ``2 D[a]`` per decay channel, and
the stochastic one measures every decay channel in two homodyne quadratures,
``a`` and ``i a``, so that the two measurement dissipators add up to ``2 D[a]``.

Integration is fixed-step.  Within one input interval the drive is constant,
so the deterministic generator is a constant sparse Liouvillian
``L0 + f * L1`` and RK4 is applied to the vectorized density matrix.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _kernels
from .errors import ContractViolation, IntegratorError
from .system import CollapseOperator, as_array

log = logging.getLogger(__name__)

TRACE_DRIFT_LIMIT = 1e-6
# |h * lambda| kept below this; RK4 is stable up to ~2.8 on the imaginary axis
RK4_STEP_SCALE = 2.0
# above this many RK4 substeps per interval the exact propagator is cheaper
EXPM_SWITCH = 20000
EXPM_MAX_DIM = 32


def _ops(collapse_ops) -> list[np.ndarray]:
    return [op.operator if isinstance(op, CollapseOperator) else as_array(op) for op in collapse_ops]


def lindblad_rhs(rho, H, collapse_ops) -> np.ndarray:
    """``-i[H, rho] + 2 sum_a D[a] rho`` with ``D[a] rho = a rho a^dag - {a^dag a, rho}/2``."""
    rho = np.asarray(rho)
    H = as_array(H)
    if rho.shape != H.shape or rho.ndim != 2:
        raise ContractViolation(f"rho {rho.shape} and H {H.shape} must be equal square shapes")
    out = -1j * (H @ rho - rho @ H)
    for a in _ops(collapse_ops):
        if a.shape != rho.shape:
            raise ContractViolation(f"collapse operator shape {a.shape} != {rho.shape}")
        ad = a.conj().T
        n = ad @ a
        out += 2.0 * (a @ rho @ ad) - (n @ rho + rho @ n)
    return out


def measurement_superoperator(rho, a) -> np.ndarray:
    """``H[a] rho = a rho + rho a^dag - <a + a^dag> rho``."""
    a = as_array(a)
    ar = a @ rho
    mean = np.trace(ar + ar.conj().T).real / np.trace(rho).real
    return ar + ar.conj().T - mean * rho


def liouvillian(H, collapse_ops=()) -> sp.csr_matrix:
    """Sparse superoperator acting on row-major ``rho.ravel()``.

    Uses ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """
    H = sp.csr_matrix(as_array(H))
    d = H.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    L = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for a in _ops(collapse_ops):
        a = sp.csr_matrix(a)
        n = (a.conj().T @ a).tocsr()
        L = L + 2.0 * sp.kron(a, a.conj()) - sp.kron(n, eye) - sp.kron(eye, n.T)
    L = L.tocsr()
    L.eliminate_zeros()
    L.sort_indices()
    return L


def _on_pattern(M: sp.csr_matrix, rows, cols) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros(0, dtype=complex)
    M = M.tocsr()
    return np.asarray(M[rows, cols]).ravel().astype(complex)


def renormalize(rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Re-Hermitize and rescale to unit trace; returns the trace correction."""
    tr = np.trace(rho).real
    if not np.isfinite(tr) or abs(tr - 1.0) > TRACE_DRIFT_LIMIT:
        raise IntegratorError(
            f"trace drifted to {tr!r} within one interval; increase the substep count"
        )
    rho = 0.5 * (rho + rho.conj().T) / tr
    return rho, tr - 1.0


def _guard(rho: np.ndarray) -> None:
    peak = np.max(np.abs(rho))
    if not np.isfinite(peak) or peak > 1.0 + 1e-6:
        raise IntegratorError(
            f"density matrix entry reached {peak!r}; the step is outside the stability region, "
            "increase the substep count"
        )


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])


def check_density_matrix(rho, trace_tol=1e-8, herm_tol=1e-10, pos_tol=None) -> None:
    """Raise :class:`ContractViolation` unless ``rho`` is a valid state."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ContractViolation(f"rho not Hermitian: {herm:.2e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ContractViolation(f"trace {tr!r} differs from 1")
    if pos_tol is not None:
        lam = min_eigenvalue(rho)
        if lam < -pos_tol:
            raise ContractViolation(f"minimum eigenvalue {lam:.2e}")


class MasterEquation:
    """Cached vectorized generator ``L0 + f * L1`` for a piecewise-constant drive.

    ``H_drive_unit`` is the drive Hamiltonian for unit input amplitude.
    """

    def __init__(self, H_static, H_drive_unit, collapse_ops):
        H0 = as_array(H_static)
        H1 = as_array(H_drive_unit) if H_drive_unit is not None else np.zeros_like(H0)
        self.dim = H0.shape[0]
        self.H0 = H0
        self.H1 = H1
        collapse_ops = list(collapse_ops)
        self.collapse_ops = _ops(collapse_ops)
        self.rates = [op.rate if isinstance(op, CollapseOperator) else 1.0 for op in collapse_ops]
        L0 = liouvillian(H0, self.collapse_ops)
        L1 = liouvillian(H1)
        pattern = (abs(L0) + abs(L1)).tocsr()
        pattern.sort_indices()
        coo = pattern.tocoo()
        self.indptr = pattern.indptr.astype(np.int64)
        self.indices = pattern.indices.astype(np.int64)
        # pattern.tocoo() walks rows in CSR order, so values align with indices
        self.data0 = _on_pattern(L0, coo.row, coo.col)
        self.data1 = _on_pattern(L1, coo.row, coo.col)
        self.L0 = L0
        self.L1 = L1

        self._decay = float(sum(2.0 * np.linalg.norm(a, 2) ** 2 for a in self.collapse_ops))
        self._meas = None
        self._kraus = None
        self._prop_key = None
        self._prop = None

    def spectral_bound(self, f: float) -> float:
        """Estimate of the largest ``|lambda|`` of ``L0 + f L1``.

        Imaginary parts are bounded by the eigenvalue spread of ``H0 + f H1``
        and real parts by the summed dissipator norms.
        """
        evals = np.linalg.eigvalsh(self.H0 + f * self.H1)
        return math.hypot(evals[-1] - evals[0], self._decay)

    def min_substeps(self, f: float, dt: float) -> int:
        return max(1, math.ceil(dt * self.spectral_bound(f) / RK4_STEP_SCALE))

    def stochastic_substeps(self, f: float, dt: float, substeps: int, scheme: str = "kraus") -> int:
        """Substeps for one stochastic interval.

        The Kraus scheme is unconditionally stable.  An explicit Euler step
        amplifies an oscillating mode by ``sqrt(1 + (h lambda)^2)``, so over
        ``n`` substeps the growth is about ``exp((dt lambda)^2 / 2n)``;
        Euler-Maruyama therefore gets the floor ``n >= (dt lambda)^2``.
        """
        if substeps < 1:
            raise ContractViolation(f"substeps must be >= 1, got {substeps}")
        if scheme == "euler":
            floor = math.ceil((dt * self.spectral_bound(f)) ** 2)
            return max(int(substeps), floor)
        return int(substeps)

    def data(self, f: float) -> np.ndarray:
        return self.data0 + f * self.data1

    def rhs(self, v: np.ndarray, f: float) -> np.ndarray:
        return (self.L0 @ v) + f * (self.L1 @ v)

    def dense(self, f: float) -> np.ndarray:
        return (self.L0 + f * self.L1).toarray()

    def choose_method(self, f: float, dt: float, substeps: int | None) -> tuple[str, int]:
        need = self.min_substeps(f, dt)
        n = need if substeps is None else max(substeps, need)
        if n > EXPM_SWITCH and self.dim <= EXPM_MAX_DIM:
            return "expm", n
        return "rk4", n

    def propagate(self, v, f, dt, substeps=None, method="auto") -> np.ndarray:
        """Advance the vectorized state by ``dt`` with constant drive ``f``.

        ``substeps`` is a floor; the stability minimum for this ``f`` is
        always respected when ``method`` is ``"auto"`` or ``"rk4"`` with
        ``substeps=None``.  An explicit ``method="rk4"`` with ``substeps``
        uses exactly that count.
        """
        v = np.array(v, dtype=complex, copy=True)
        if method == "auto":
            method, n = self.choose_method(f, dt, substeps)
        elif method == "rk4":
            n = self.min_substeps(f, dt) if substeps is None else int(substeps)
        elif method == "expm":
            n = 0
        else:
            raise ContractViolation(f"unknown method {method!r}")
        if method == "expm":
            return scipy.linalg.expm(dt * self.dense(f)) @ v
        _kernels.rk4_interval(self.indptr, self.indices, self.data(f), v, dt / n, n)
        return v

    def channels(self):
        """Measured channels ``[a_1, i a_1, a_2, i a_2, ...]`` and their rates."""
        out = []
        for a, rate in zip(self.collapse_ops, self.rates):
            out += [(a, rate), (1j * a, rate)]
        return out

    def measurement_maps(self):
        """CSR of stacked ``rho -> b rho + rho b^dag`` and expectation rows."""
        if self._meas is None:
            eye = sp.identity(self.dim, dtype=complex, format="csr")
            blocks, rows, scale = [], [], []
            for b, rate in self.channels():
                blocks.append(sp.kron(sp.csr_matrix(b), eye) + sp.kron(eye, sp.csr_matrix(b.conj())))
                rows.append((b + b.conj().T).T.ravel())
                scale.append(math.sqrt(rate))
            G = sp.vstack(blocks).tocsr()
            G.sort_indices()
            self._meas = (
                G.indptr.astype(np.int64),
                G.indices.astype(np.int64),
                G.data.astype(complex),
                np.array(rows, dtype=complex),
                np.array(scale, dtype=float),
            )
        return self._meas

    def _kraus_ops(self):
        if self._kraus is None:
            chans = self.channels()
            Ls = np.array([b for b, _ in chans], dtype=complex)
            Xs = Ls + Ls.conj().transpose(0, 2, 1)
            Q = np.einsum("cij,cjk->ik", Ls, Ls)
            loss = np.einsum("cji,cjk->ik", Ls.conj(), Ls)
            scale = np.array([math.sqrt(r) for _, r in chans])
            self._kraus = (Ls, Xs, Q, loss, scale)
        return self._kraus

    def effective_propagator(self, f: float, h: float) -> np.ndarray:
        """``exp(-i h (H0 + f H1 - i/2 sum_c L_c^dag L_c))`` over measured channels."""
        key = (float(f), float(h))
        if self._prop_key != key:
            loss = self._kraus_ops()[3]
            H = self.H0 + f * self.H1 - 0.5j * loss
            self._prop = scipy.linalg.expm(-1j * h * H)
            self._prop_key = key
        return self._prop

    def stochastic_interval(self, v, f, dw, dt, scheme="kraus") -> np.ndarray:
        """Advance one conditional state in place over ``dw.shape[0]`` substeps.

        ``v`` is the row-major vectorized state.  Returns the
        interval-averaged measurement records per channel.
        """
        h = dt / dw.shape[0]
        dw = np.ascontiguousarray(dw, dtype=float)
        if scheme == "kraus":
            Ls, Xs, Q, _, scale = self._kraus_ops()
            rho = v.reshape(self.dim, self.dim)
            return _kernels.kraus_interval(self.effective_propagator(f, h), Ls, Xs, Q, scale,
                                           rho, dw, h)
        if scheme == "euler":
            g_indptr, g_indices, g_data, m_rows, scale = self.measurement_maps()
            return _kernels.sme_interval(
                self.indptr, self.indices, self.data(f), g_indptr, g_indices, g_data,
                m_rows, scale, v, dw, h, self.dim,
            )
        raise ContractViolation(f"unknown stochastic scheme {scheme!r}")


def evolve_deterministic(rho, H_static, H_drive, collapse_ops, t0, t1, substeps=None,
                         method="auto") -> np.ndarray:
    """Integrate the master equation over ``[t0, t1)`` with constant drive.

    The result is re-Hermitized and renormalized once at the end.
    """
    if not t1 > t0:
        raise ContractViolation(f"need t1 > t0, got [{t0}, {t1})")
    rho = np.asarray(rho, dtype=complex)
    me = MasterEquation(H_static, H_drive, collapse_ops)
    v = me.propagate(rho.ravel(), 1.0, t1 - t0, substeps=substeps, method=method)
    out = v.reshape(rho.shape)
    _guard(out)
    out, corr = renormalize(out)
    log.debug("renormalized trace by %.3e", corr)
    return out


@dataclass(frozen=True)
class WienerPath:
    """Gaussian increments ``dW[substep, channel]`` with variance ``dt``."""

    dW: np.ndarray
    dt: float

    @classmethod
    def sample(cls, rng: np.random.Generator, substeps: int, n_channels: int, dt: float):
        return cls(rng.normal(0.0, math.sqrt(dt), size=(substeps, n_channels)), dt)

    @property
    def substeps(self) -> int:
        return self.dW.shape[0]


def sme_step(rho, H, collapse_ops, dW: Sequence[float], dt: float):
    """One Euler-Maruyama step of the homodyne stochastic master equation.

    ``dW`` has one increment per channel ``[a_1, i a_1, a_2, i a_2, ...]``.
    Returns the renormalized state and the records ``<O> + dW/dt``, where
    ``O = (b + b^dag)/sqrt(rate)`` is the observable measured by channel ``b``.
    """
    if not dt > 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    ops = list(collapse_ops)
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (2 * len(ops),):
        raise ContractViolation(f"need {2 * len(ops)} increments, got shape {dW.shape}")
    rho = np.asarray(rho, dtype=complex)
    drho = lindblad_rhs(rho, H, ops) * dt
    records = np.empty(dW.size)
    for j, op in enumerate(ops):
        a = op.operator if isinstance(op, CollapseOperator) else as_array(op)
        rate = op.rate if isinstance(op, CollapseOperator) else 1.0
        for k, b in enumerate((a, 1j * a)):
            ch = 2 * j + k
            obs = (b + b.conj().T) / math.sqrt(rate)
            records[ch] = np.trace(obs @ rho).real / np.trace(rho).real + dW[ch] / dt
            drho += dW[ch] * measurement_superoperator(rho, b)
    out = rho + drho
    out = 0.5 * (out + out.conj().T)
    out = out / np.trace(out).real
    return out, records


def evolve_stochastic(rho, H_static, H_drive, collapse_ops, t0, t1, substeps, rng,
                      scheme="kraus"):
    """Integrate the homodyne stochastic master equation over ``[t0, t1)``.

    ``scheme="euler"`` chains Euler-Maruyama steps; it is only stable when
    the substep is small against the Hamiltonian spread, so the substep
    count is raised to that floor.  ``scheme="kraus"`` (default) applies the
    normalized map ``rho -> K rho K^dag / Tr`` per substep, which keeps the
    state positive and has the same Ito drift and diffusion to first order.
    Returns ``(rho, records)`` with records averaged over the interval.
    """
    if not t1 > t0:
        raise ContractViolation(f"need t1 > t0, got [{t0}, {t1})")
    rho = np.asarray(rho, dtype=complex)
    me = MasterEquation(H_static, H_drive, collapse_ops)
    dt = t1 - t0
    substeps = me.stochastic_substeps(1.0, dt, substeps, scheme)
    path = WienerPath.sample(rng, substeps, 2 * len(me.collapse_ops), dt / substeps)
    v = rho.ravel().copy()
    records = me.stochastic_interval(v, 1.0, path.dW, dt, scheme=scheme)
    out = v.reshape(rho.shape)
    _guard(out)
    out, _ = renormalize(out)
    return out, records
