"""Truncated Hilbert space and operators for N two-level atoms in one cavity mode.

Basis ordering is photon-major: the basis index of ``|n, s_1 ... s_N>`` is
``n * 2**N + sum_i s_i * 2**(N - i)`` with ``s_i = 0`` for ground and ``1`` for
excited, i.e. the Fock factor is the leftmost Kronecker factor and atom 1 is
the most significant atomic bit.  Every module relies on this ordering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation, ResourceError

log = logging.getLogger(__name__)

MAX_DIM = 4096
HERMITIAN_TOL = 1e-12

# |g><e| in the (g, e) single-atom basis
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class Operator:
    """Dense ``dim x dim`` operator with a hermiticity flag."""

    data: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.hermitian:
            gap = np.max(np.abs(self.data - self.data.conj().T), initial=0.0)
            if gap >= HERMITIAN_TOL:
                raise ContractViolation(f"operator flagged hermitian but |A - A^dag| = {gap:.3e}")

    @property
    def H(self) -> np.ndarray:
        return self.data.conj().T

    def expect(self, rho: np.ndarray) -> complex:
        """``Tr[A rho]``."""
        return np.einsum("ij,ji->", self.data, rho)


class CollapseOperator(NamedTuple):
    """Decay channel ``sqrt(rate) * a``; ``operator`` already carries the root."""

    name: str
    operator: np.ndarray
    rate: float


@dataclass(frozen=True)
class SystemSpec:
    n_atom: int
    n_fock: int
    c: np.ndarray = field(repr=False)
    sigma: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.n_fock * 2**self.n_atom

    @property
    def n_readouts(self) -> int:
        return 2 * self.n_atom + 2

    def ground_state(self) -> np.ndarray:
        """``|0, g...g><0, g...g|``."""
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    def fock_populations(self, rho: np.ndarray) -> np.ndarray:
        """Photon-number distribution of ``rho`` (atoms traced out)."""
        diag = np.real(np.diagonal(rho))
        return diag.reshape(self.n_fock, 2**self.n_atom).sum(axis=1)


@dataclass(frozen=True)
class ReservoirParams:
    omega_c: float
    omega_i: tuple
    g_i: tuple
    epsilon: float
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "omega_i", tuple(float(w) for w in self.omega_i))
        object.__setattr__(self, "g_i", tuple(float(g) for g in self.g_i))
        if len(self.omega_i) != len(self.g_i):
            raise ContractViolation(
                f"omega_i has {len(self.omega_i)} entries but g_i has {len(self.g_i)}"
            )
        if not self.kappa > 0:
            raise ContractViolation(f"kappa must be positive, got {self.kappa}")
        if not self.epsilon >= 0:
            raise ContractViolation(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def n_atom(self) -> int:
        return len(self.omega_i)


def build_space(n_atom: int, n_fock: int, max_dim: int = MAX_DIM) -> SystemSpec:
    if n_atom < 0:
        raise ContractViolation(f"n_atom must be >= 0, got {n_atom}")
    if n_fock < 2:
        raise ContractViolation(f"n_fock must be >= 2, got {n_fock}")
    dim = n_fock * 2**n_atom
    if dim > max_dim:
        raise ResourceError(f"Hilbert space dimension {dim} exceeds cap {max_dim}")

    n_spin = 2**n_atom
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)
    c = np.kron(a, np.eye(n_spin))
    sigma = []
    for i in range(n_atom):
        left = np.eye(n_fock * 2**i)
        right = np.eye(2 ** (n_atom - i - 1))
        sigma.append(np.kron(np.kron(left, _LOWER), right))
    for op in (c, *sigma):
        op.setflags(write=False)
    return SystemSpec(n_atom, n_fock, c, tuple(sigma))


def _check_params(spec: SystemSpec, params: ReservoirParams) -> None:
    if params.n_atom != spec.n_atom:
        raise ContractViolation(
            f"params describe {params.n_atom} atoms but the space has {spec.n_atom}"
        )


def hamiltonian_static(spec: SystemSpec, params: ReservoirParams) -> Operator:
    """Cavity, atom and Jaynes-Cummings coupling terms (time independent)."""
    _check_params(spec, params)
    c = spec.c
    cd = c.conj().T
    H = params.omega_c * (cd @ c)
    for w, g, s in zip(params.omega_i, params.g_i, spec.sigma):
        sd = s.conj().T
        H = H + w * (sd @ s) + g * (cd @ s + c @ sd)
    return Operator(H, hermitian=True)


def hamiltonian_drive(spec: SystemSpec, epsilon: float, f_tilde: float) -> Operator:
    """Coherent drive ``i eps f (c - c^dag)``, constant over one input step."""
    if not np.isfinite(f_tilde):
        raise ContractViolation(f"drive amplitude must be finite, got {f_tilde}")
    c = spec.c
    return Operator(1j * epsilon * f_tilde * (c - c.conj().T), hermitian=True)


def readout_labels(n_atom: int) -> list[str]:
    labels = ["Q", "P"]
    for i in range(1, n_atom + 1):
        labels += [f"sx{i}", f"sy{i}"]
    return labels


def observables(spec: SystemSpec) -> list[Operator]:
    """Readout observables ``[Q, P, sx_1, sy_1, ..., sx_N, sy_N]``."""
    out = []
    for a in (spec.c, *spec.sigma):
        ad = a.conj().T
        out.append(Operator(a + ad, hermitian=True))
        out.append(Operator(1j * (a - ad), hermitian=True))
    return out


def collapse_operators(spec: SystemSpec, kappa: float) -> list[CollapseOperator]:
    """Cavity and atomic decay channels sharing ``kappa`` equally.

    Each of the ``n_atom + 1`` emitters gets ``kappa / (2 n_atom + 2)``.
    """
    if not kappa > 0:
        raise ContractViolation(f"kappa must be positive, got {kappa}")
    rate = kappa / (2 * spec.n_atom + 2)
    root = np.sqrt(rate)
    ops = [CollapseOperator("c", root * spec.c, rate)]
    for i, s in enumerate(spec.sigma, start=1):
        ops.append(CollapseOperator(f"sigma{i}", root * s, rate))
    return ops


def homodyne_channels(spec: SystemSpec, kappa: float) -> list[CollapseOperator]:
    """Measured channels ``{sqrt(k) a, i sqrt(k) a}`` for every decay operator.

    Ordered like :func:`observables`, so channel ``n`` measures readout ``n``.
    """
    out = []
    for op in collapse_operators(spec, kappa):
        out.append(CollapseOperator(op.name, op.operator, op.rate))
        out.append(CollapseOperator("i" + op.name, 1j * op.operator, op.rate))
    return out


def truncation_weight(spec: SystemSpec, rho: np.ndarray, levels: int = 2) -> float:
    """Population in the top ``levels`` Fock states."""
    return float(spec.fock_populations(rho)[-levels:].sum())


def as_array(op) -> np.ndarray:
    return op.data if isinstance(op, Operator) else np.asarray(op)


def stack(ops: Sequence) -> np.ndarray:
    return np.stack([as_array(o) for o in ops])
