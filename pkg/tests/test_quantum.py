import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import fd_gradient, gradient_mismatch, kron_loop, propagate_oracle, taylor_expm

from agrape.model import ControlPulse, cnot, infidelity_and_gradient, propagate
from agrape.quantum import PAULI, expm_hermitian, infidelity, tensor_operator


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def random_unitary(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


# -- expm_hermitian ---------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_expm_of_zero_is_identity(n):
    assert np.array_equal(expm_hermitian(np.zeros((n, n)), 1.0), np.eye(n))


def test_expm_pauli_x_quarter_turn():
    U = expm_hermitian(PAULI["X"], np.pi / 2)
    np.testing.assert_allclose(U, [[0, -1j], [-1j, 0]], atol=1e-15)


def test_expm_matches_taylor_oracle(rng):
    H = random_hermitian(rng, 4)
    U = expm_hermitian(H, 0.03)
    ref = taylor_expm(-1j * H * 0.03).astype(complex)
    assert np.linalg.norm(U - ref) < 1e-10


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        expm_hermitian(np.array([[0, 1], [0, 0]]), 1.0)


def test_expm_rejects_negative_time():
    with pytest.raises(ValueError):
        expm_hermitian(PAULI["Z"], -0.1)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([2, 3, 4, 8]), dt=st.floats(0, 10))
def test_expm_is_unitary(seed, n, dt):
    H = random_hermitian(np.random.default_rng(seed), n)
    U = expm_hermitian(H, dt)
    assert np.linalg.norm(U.conj().T @ U - np.eye(n)) < 1e-10


# -- infidelity -------------------------------------------------------------


def test_infidelity_identical_gates():
    assert infidelity(cnot(), cnot()) == 0.0


def test_infidelity_antipodal_phase():
    assert infidelity(-cnot(), cnot()) == pytest.approx(1.0, abs=1e-15)


def test_infidelity_identity_vs_cnot():
    assert infidelity(np.eye(4), cnot()) == pytest.approx(0.25, abs=1e-15)


def test_infidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        infidelity(np.eye(2), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([2, 4, 8]))
def test_infidelity_bounds_and_left_invariance(seed, n):
    rng = np.random.default_rng(seed)
    U, Uf, V = (random_unitary(rng, n) for _ in range(3))
    L = infidelity(U, Uf)
    assert 0.0 <= L <= 4.0 / n + 1e-15
    assert abs(infidelity(V @ U, V @ Uf) - L) < 1e-12
    assert abs(L - (2 * n - 2 * np.trace(Uf.conj().T @ U).real) / n**2) < 1e-12


# -- tensor_operator --------------------------------------------------------


def test_tensor_single_z():
    np.testing.assert_array_equal(tensor_operator(["Z"]), np.diag([1, -1]))


def test_tensor_zz():
    np.testing.assert_array_equal(tensor_operator(["Z", "Z"]), np.diag([1, -1, -1, 1]))


def test_tensor_xii_against_loop_oracle():
    ref = kron_loop(PAULI["X"], kron_loop(PAULI["I"], PAULI["I"]))
    np.testing.assert_array_equal(tensor_operator(["X", "I", "I"]), ref)
    assert tensor_operator("XII").shape == (8, 8)


def test_tensor_rejects_unknown_label():
    with pytest.raises(ValueError, match="unknown Pauli"):
        tensor_operator(["X", "Q"])
    with pytest.raises(ValueError):
        tensor_operator([])


# -- propagate --------------------------------------------------------------


def test_drift_only_two_qubit_is_zz_phase(two_qubit):
    u = ControlPulse(np.zeros((100, 4)), 0.3)
    U = propagate(two_qubit, u, np.zeros(3))
    gT = 10.0 * 0.3
    expected = np.diag(np.exp(-1j * gT * np.array([1, -1, -1, 1])))
    np.testing.assert_allclose(U, expected, atol=1e-12)


def test_single_zero_slice_is_identity(two_qubit):
    # one slice, zero controls, drift switched off by eps_0 = -1 (out of domain on purpose)
    u = ControlPulse(np.zeros((1, 4)), 0.3)
    U = propagate(two_qubit, u, np.array([-1.0, 0.0, 0.0]))
    np.testing.assert_allclose(U, np.eye(4), atol=1e-15)


def test_propagate_matches_slice_taylor_oracle(two_qubit, rng):
    u = two_qubit.random_pulse(rng)
    U = propagate(two_qubit, u, np.zeros(3))
    ref = propagate_oracle(two_qubit, u.values, np.zeros(3)).astype(complex)
    assert np.linalg.norm(U - ref) < 1e-9


def test_propagate_rejects_channel_mismatch(two_qubit):
    with pytest.raises(ValueError, match="channels"):
        propagate(two_qubit, ControlPulse(np.zeros((100, 3)), 0.3), np.zeros(3))


@pytest.mark.parametrize("preset", ["two_qubit", "three_qubit"])
def test_refinement_consistency(preset, request, rng):
    problem = request.getfixturevalue(preset)
    u = problem.random_pulse(rng)
    fine = ControlPulse(np.repeat(u.values, 2, axis=0), u.total_time)
    eps = rng.uniform(-0.2, 0.2, problem.n_uncertain)
    assert np.linalg.norm(propagate(problem, u, eps) - propagate(problem, fine, eps)) < 1e-9


@pytest.mark.parametrize("preset", ["two_qubit", "three_qubit"])
def test_propagate_unitary(preset, request, rng):
    problem = request.getfixturevalue(preset)
    for _ in range(5):
        U = propagate(problem, problem.random_pulse(rng), rng.uniform(-0.2, 0.2, problem.n_uncertain))
        assert np.linalg.norm(U.conj().T @ U - np.eye(problem.dim)) < 1e-10


# -- gradients --------------------------------------------------------------


@pytest.mark.parametrize("preset", ["two_qubit", "three_qubit"])
def test_gradient_matches_finite_differences(preset, request, rng):
    problem = request.getfixturevalue(preset)
    u = problem.random_pulse(rng)
    eps = rng.uniform(-0.2, 0.2, problem.n_uncertain)
    L, g = infidelity_and_gradient(problem, u, eps)
    assert g.shape == u.values.shape
    assert gradient_mismatch(g, fd_gradient(problem, u.values, eps)) <= 0


def test_gradient_on_degenerate_drift_only_slices(two_qubit):
    u = ControlPulse(np.zeros((100, 4)), 0.3)
    eps = np.array([0.1, -0.05, 0.2])
    L, g = infidelity_and_gradient(two_qubit, u, eps)
    assert np.all(np.isfinite(g))
    assert gradient_mismatch(g, fd_gradient(two_qubit, u.values, eps)) <= 0


def test_gradient_vanishes_at_nominal_optimum(two_qubit, nominal_two_qubit):
    L, g = infidelity_and_gradient(two_qubit, nominal_two_qubit, np.zeros(3))
    assert L < 1e-10
    assert np.max(np.abs(g)) < 1e-5


def test_uncertainty_gradient_matches_finite_differences(three_qubit, rng):
    u = three_qubit.random_pulse(rng)
    eps = rng.uniform(-0.2, 0.2, 2)
    _, g = three_qubit.infidelities_and_eps_gradients(u, eps[None])
    h = 1e-6
    for a in range(2):
        step = np.eye(2)[a] * h
        fd = (three_qubit.infidelities(u, (eps + step)[None])[0]
              - three_qubit.infidelities(u, (eps - step)[None])[0]) / (2 * h)
        assert g[0, a] == pytest.approx(fd, rel=1e-5, abs=1e-9)
