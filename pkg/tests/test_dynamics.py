import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from fbqrc import dynamics, system
from fbqrc.errors import ContractViolation, IntegratorError

from .conftest import random_density_matrix


def jc_setup(n_fock=3, g=30.0):
    spec = system.build_space(1, n_fock)
    p = system.ReservoirParams(0.0, [0.0], [g], 0.0, 1.0)
    return spec, system.hamiltonian_static(spec, p)


def test_rhs_zero_hamiltonian_no_decay(rng):
    rho = random_density_matrix(rng, 6)
    np.testing.assert_array_equal(dynamics.lindblad_rhs(rho, np.zeros((6, 6)), []), 0)


@given(st.integers(0, 10_000), st.integers(2, 5), st.floats(0.1, 20))
def test_rhs_traceless(seed, n_fock, kappa):
    r = np.random.default_rng(seed)
    spec = system.build_space(1, n_fock)
    p = system.ReservoirParams(r.uniform(0, 40), [r.uniform(0, 40)], [r.uniform(0, 30)], 20.0, kappa)
    H = system.hamiltonian_static(spec, p).data + system.hamiltonian_drive(spec, 20.0, 0.7).data
    rho = random_density_matrix(r, spec.dim)
    out = dynamics.lindblad_rhs(rho, H, system.collapse_operators(spec, kappa))
    assert abs(np.trace(out)) < 1e-12


def test_rhs_dimension_mismatch():
    with pytest.raises(ContractViolation):
        dynamics.lindblad_rhs(np.eye(3) / 3, np.zeros((4, 4)), [])


@given(st.floats(0, 40), st.floats(0.2, 10), st.floats(-2, 2), st.integers(0, 1000))
def test_driven_cavity_heisenberg_equation(omega_c, kappa, f, seed):
    # d<c>/dt = -(i omega_c + kappa_c) <c> - eps f, exact away from the Fock cutoff
    spec = system.build_space(0, 8)
    p = system.ReservoirParams(omega_c, [], [], 20.0, kappa)
    H = system.hamiltonian_static(spec, p).data + system.hamiltonian_drive(spec, 20.0, f).data
    ops = system.collapse_operators(spec, kappa)
    r = np.random.default_rng(seed)
    rho = np.zeros((8, 8), complex)
    rho[:4, :4] = random_density_matrix(r, 4)
    c = spec.c
    lhs = np.trace(dynamics.lindblad_rhs(rho, H, ops) @ c)
    kappa_c = kappa / 2
    rhs = -(1j * omega_c + kappa_c) * np.trace(rho @ c) - 20.0 * f
    assert abs(lhs - rhs) < 1e-10


def test_liouvillian_matches_rhs(rng):
    spec = system.build_space(1, 3)
    p = system.ReservoirParams(40, [20], [30], 20, 10)
    H = system.hamiltonian_static(spec, p).data
    ops = system.collapse_operators(spec, 10)
    rho = random_density_matrix(rng, spec.dim)
    L = dynamics.liouvillian(H, [o.operator for o in ops])
    np.testing.assert_allclose((L @ rho.ravel()).reshape(rho.shape),
                               dynamics.lindblad_rhs(rho, H, ops), atol=1e-12)


def test_no_dynamics_leaves_state_unchanged(rng):
    rho = random_density_matrix(rng, 5)
    out = dynamics.evolve_deterministic(rho, np.zeros((5, 5)), None, [], 0.0, 3.7)
    np.testing.assert_allclose(out, rho, atol=1e-15)


@pytest.mark.parametrize("t", [0.01, 0.05, 0.1])
def test_vacuum_rabi(t):
    spec, H = jc_setup()
    g = 30.0
    rho = np.zeros((spec.dim, spec.dim), complex)
    e0 = 1  # |0 photons, excited>
    rho[e0, e0] = 1.0
    out = dynamics.evolve_deterministic(rho, H, None, [], 0.0, t, substeps=2000, method="rk4")
    assert abs(out[e0, e0].real - math.cos(g * t) ** 2) < 1e-6


def test_driven_cavity_steady_state():
    # transient decays as exp(-kappa_c t); t = 8 leaves ~2e-9 of it, whereas
    # 4 / kappa_c would still leave ~1e-2 of the initial offset
    spec = system.build_space(0, 10)
    p = system.ReservoirParams(40.0, [], [], 20.0, 5.0)
    me = dynamics.MasterEquation(system.hamiltonian_static(spec, p),
                                 system.hamiltonian_drive(spec, 20.0, 1.0),
                                 system.collapse_operators(spec, 5.0))
    v = spec.ground_state().ravel()
    for _ in range(8):
        v = me.propagate(v, 1.0, 1.0)
    rho = v.reshape(spec.dim, spec.dim)
    expected = -20.0 / (2.5 + 40j)
    assert abs(np.trace(rho @ spec.c) - expected) < 1e-4


def _random_me(rng):
    n_atom = int(rng.integers(0, 2))
    n_fock = int(rng.integers(2, 7 if n_atom else 13))
    spec = system.build_space(n_atom, n_fock)
    p = system.ReservoirParams(rng.uniform(0, 40), rng.uniform(0, 40, n_atom),
                               rng.uniform(0, 30, n_atom), rng.uniform(0, 20), rng.uniform(0.1, 10))
    me = dynamics.MasterEquation(system.hamiltonian_static(spec, p),
                                 system.hamiltonian_drive(spec, p.epsilon, 1.0),
                                 system.collapse_operators(spec, p.kappa))
    return spec, me


def test_rk4_against_expm_oracle(rng):
    for _ in range(5):
        spec, me = _random_me(rng)
        f = rng.uniform(-2, 2)
        rho = random_density_matrix(rng, spec.dim)
        exact = scipy.linalg.expm(me.dense(f)) @ rho.ravel()
        v = me.propagate(rho.ravel(), f, 1.0, substeps=10_000, method="rk4")
        assert np.max(np.abs(v - exact)) < 1e-8


def test_auto_method_picks_expm_only_when_cheaper():
    spec, H = jc_setup(n_fock=2, g=1e5)
    me = dynamics.MasterEquation(H, None, [])
    assert me.choose_method(0.0, 1.0, None)[0] == "expm"
    assert me.choose_method(0.0, 1e-4, None)[0] == "rk4"


def test_trace_drift_raises():
    spec, H = jc_setup()
    rho = spec.ground_state()
    rho[0, 0] = 1.5  # not a state: the single renormalization would hide a 0.5 drift
    with pytest.raises(IntegratorError):
        dynamics.evolve_deterministic(rho, H, None, [], 0.0, 0.01)


def test_rk4_instability_detected():
    spec, H = jc_setup(n_fock=4)
    rho = np.eye(spec.dim, dtype=complex) / spec.dim
    rho[0, 1] = rho[1, 0] = 0.05
    with pytest.raises(IntegratorError):
        dynamics.evolve_deterministic(rho, 50 * H.data, None, [], 0.0, 1.0, substeps=3, method="rk4")


def test_evolve_requires_forward_time():
    spec, H = jc_setup()
    with pytest.raises(ContractViolation):
        dynamics.evolve_deterministic(spec.ground_state(), H, None, [], 1.0, 1.0)


@given(st.integers(0, 10_000))
def test_measurement_superoperator_traceless(seed):
    r = np.random.default_rng(seed)
    spec = system.build_space(1, 3)
    rho = random_density_matrix(r, spec.dim)
    for ch in system.homodyne_channels(spec, r.uniform(0.1, 10)):
        assert abs(np.trace(dynamics.measurement_superoperator(rho, ch.operator))) < 1e-12


def test_sme_step_zero_noise_is_euler(rng):
    spec = system.build_space(1, 3)
    p = system.ReservoirParams(40, [20], [30], 20, 10)
    H = system.hamiltonian_static(spec, p).data
    ops = system.collapse_operators(spec, 10)
    rho = random_density_matrix(rng, spec.dim)
    dt = 1e-4
    out, rec = dynamics.sme_step(rho, H, ops, np.zeros(4), dt)
    euler = rho + dt * dynamics.lindblad_rhs(rho, H, ops)
    euler = 0.5 * (euler + euler.conj().T)
    np.testing.assert_allclose(out, euler / np.trace(euler).real, atol=1e-14)
    Q = system.observables(spec)[0].data
    assert rec[0] == pytest.approx(np.trace(Q @ rho).real, abs=1e-12)


def test_sme_step_preconditions(rng):
    spec = system.build_space(0, 2)
    ops = system.collapse_operators(spec, 1.0)
    rho = spec.ground_state()
    with pytest.raises(ContractViolation):
        dynamics.sme_step(rho, np.zeros((2, 2)), ops, [0.0, 0.0], 0.0)
    with pytest.raises(ContractViolation):
        dynamics.sme_step(rho, np.zeros((2, 2)), ops, [0.0], 1e-3)


def test_sme_step_ito_mean():
    # averaging single steps over dW reproduces the Euler update of every observable
    rng = np.random.default_rng(11)
    spec = system.build_space(1, 3)
    p = system.ReservoirParams(40, [20], [30], 20, 10)
    H = system.hamiltonian_static(spec, p).data + system.hamiltonian_drive(spec, 20, 0.8).data
    ops = system.collapse_operators(spec, 10)
    rho = random_density_matrix(rng, spec.dim)
    dt = 1e-3
    obs = [o.data for o in system.observables(spec)]
    n = 10_000
    dW = rng.normal(0, math.sqrt(dt), size=(n, 4))
    samples = np.empty((n, len(obs)))
    for i in range(n):
        out, _ = dynamics.sme_step(rho, H, ops, dW[i], dt)
        samples[i] = [np.trace(o @ out).real for o in obs]
    euler = rho + dt * dynamics.lindblad_rhs(rho, H, ops)
    target = np.array([np.trace(o @ euler).real for o in obs])
    se = samples.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(samples.mean(axis=0) - target) < 3 * se + 1e-12)


def test_wiener_path_variance():
    path = dynamics.WienerPath.sample(np.random.default_rng(0), 20_000, 4, 0.01)
    assert path.substeps == 20_000
    assert abs(path.dW.mean()) < 3 * 0.1 / math.sqrt(80_000)
    assert path.dW.var() == pytest.approx(0.01, rel=0.03)


def _stochastic_setup(kappa=10.0, n_fock=4):
    spec = system.build_space(1, n_fock)
    p = system.ReservoirParams(40, [20], [30], 20, kappa)
    return (spec, system.hamiltonian_static(spec, p), system.hamiltonian_drive(spec, 20, 0.5),
            system.collapse_operators(spec, kappa))


@pytest.mark.parametrize("scheme", ["kraus", "euler"])
def test_stochastic_same_seed_bitwise(scheme):
    spec, H0, H1, ops = _stochastic_setup()
    a = dynamics.evolve_stochastic(spec.ground_state(), H0, H1, ops, 0, 0.2, 50,
                                   np.random.default_rng(5), scheme=scheme)
    b = dynamics.evolve_stochastic(spec.ground_state(), H0, H1, ops, 0, 0.2, 50,
                                   np.random.default_rng(5), scheme=scheme)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


@pytest.mark.parametrize("scheme", ["kraus", "euler"])
def test_weak_decay_zero_noise_matches_deterministic(scheme):
    spec, H0, H1, ops = _stochastic_setup(kappa=1e-8)
    me = dynamics.MasterEquation(H0, H1, ops)
    rho0 = spec.ground_state()
    v = rho0.ravel().copy()
    n = 4000 if scheme == "kraus" else 100_000  # Euler converges only at first order
    me.stochastic_interval(v, 1.0, np.zeros((n, 4)), 0.2, scheme=scheme)
    det = dynamics.evolve_deterministic(rho0, H0, H1, ops, 0, 0.2, substeps=n, method="rk4")
    assert np.max(np.abs(v.reshape(rho0.shape) - det)) < 1e-4


def test_kraus_trajectory_stays_a_state():
    spec, H0, H1, ops = _stochastic_setup()
    rng = np.random.default_rng(2)
    rho = spec.ground_state()
    for k in range(30):
        rho, rec = dynamics.evolve_stochastic(rho, H0, H1, ops, k, k + 1, 30, rng)
        dynamics.check_density_matrix(rho, pos_tol=1e-8)
        assert rec.shape == (4,)


def test_kraus_mean_matches_master_equation():
    # ensemble average of conditional states is the unconditional state
    spec, H0, H1, ops = _stochastic_setup(n_fock=4)
    rng = np.random.default_rng(3)
    n_traj = 400
    acc = np.zeros((spec.dim, spec.dim), complex)
    for _ in range(n_traj):
        rho, _ = dynamics.evolve_stochastic(spec.ground_state(), H0, H1, ops, 0, 0.3, 60, rng)
        acc += rho
    det = dynamics.evolve_deterministic(spec.ground_state(), H0, H1, ops, 0, 0.3,
                                        substeps=3000, method="rk4")
    Q = system.observables(spec)[0].data
    gap = abs(np.trace(Q @ (acc / n_traj - det)))
    assert gap < 0.05


def test_stochastic_rejects_bad_substeps():
    spec, H0, H1, ops = _stochastic_setup()
    with pytest.raises(ContractViolation):
        dynamics.evolve_stochastic(spec.ground_state(), H0, H1, ops, 0, 1, 0,
                                   np.random.default_rng(0))
    with pytest.raises(ContractViolation):
        dynamics.evolve_stochastic(spec.ground_state(), H0, H1, ops, 0, 1, 10,
                                   np.random.default_rng(0), scheme="milstein")


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_check_density_matrix(seed):
    r = np.random.default_rng(seed)
    rho = random_density_matrix(r, 4)
    dynamics.check_density_matrix(rho, pos_tol=1e-10)
    with pytest.raises(ContractViolation):
        dynamics.check_density_matrix(2 * rho)
    bad = rho.copy()
    bad[0, 1] += 1e-3
    with pytest.raises(ContractViolation):
        dynamics.check_density_matrix(bad)
