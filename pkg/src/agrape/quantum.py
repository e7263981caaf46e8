"""Unitary propagation of piecewise-constant Hamiltonians and exact gradients.

Everything here works on plain ``numpy`` arrays. The batched helpers take a
stack of slice Hamiltonians shaped ``(S, K, N, N)`` (S independent samples,
K time slices) so that a whole set of uncertainty samples is propagated with
one eigendecomposition call.

Derivatives of ``exp(-i H dt)`` use the Daleckii-Krein formula in the
eigenbasis of each slice Hamiltonian, so one ``eigh`` per slice serves both
the propagator and its derivative.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

HERMITIAN_ATOL = 1e-12
DEGENERACY_TOL = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def tensor_operator(factors):
    """Kronecker product of single-qubit Pauli/identity labels, first factor most significant.

    >>> tensor_operator("ZZ").real.diagonal()
    array([ 1., -1., -1.,  1.])
    """
    labels = [str(f).upper() for f in factors]
    if not labels:
        raise ValueError("tensor_operator needs at least one factor")
    unknown = [f for f in labels if f not in PAULI]
    if unknown:
        raise ValueError(f"unknown Pauli label(s) {unknown}; expected I, X, Y or Z")
    return reduce(np.kron, (PAULI[f] for f in labels))


def check_hermitian(H, atol=HERMITIAN_ATOL):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    dev = np.max(np.abs(H - H.conj().T), initial=0.0)
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian: max |H - H^dagger| = {dev:.3e} > {atol:g}")
    return H


def expm_hermitian(H, dt):
    """Return ``exp(-i H dt)`` for Hermitian ``H`` via its spectral decomposition."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    H = check_hermitian(H)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * dt)) @ V.conj().T


def infidelity(U, Uf):
    """Frobenius gate infidelity ``||U - Uf||^2 / N^2`` (global-phase sensitive)."""
    U = np.asarray(U)
    Uf = np.asarray(Uf)
    if U.shape != Uf.shape or U.ndim != 2:
        raise ValueError(f"dimension mismatch: {U.shape} vs {Uf.shape}")
    n = U.shape[0]
    return float(np.sum(np.abs(U - Uf) ** 2) / n**2)


def batch_infidelity(U, Uf):
    """Infidelity of every matrix in a ``(..., N, N)`` stack against ``Uf``."""
    n = Uf.shape[-1]
    return np.sum(np.abs(U - Uf) ** 2, axis=(-2, -1)) / n**2


def slice_propagators(w, V, dt):
    """``exp(-i H_k dt)`` for every slice, given ``eigh`` output ``(w, V)``."""
    return (V * np.exp(-1j * w * dt)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def ordered_product(U):
    """Time-ordered product ``U_K ... U_2 U_1`` over axis -3 of a ``(..., K, N, N)`` stack.

    Pairwise (tree) reduction keeps the Python loop at ``log2(K)`` steps.
    """
    while U.shape[-3] > 1:
        k = U.shape[-3]
        paired = U[..., 1 : k - k % 2 : 2, :, :] @ U[..., 0 : k - k % 2 : 2, :, :]
        if k % 2:
            paired = np.concatenate([paired, U[..., k - 1 :, :, :]], axis=-3)
        U = paired
    return U[..., 0, :, :]


def _divided_differences(w, dt):
    """Daleckii-Krein kernel ``Phi_pq`` of ``f(x) = exp(-i x dt)``.

    ``Phi_pq = (f(w_p) - f(w_q)) / (w_p - w_q)``, falling back to
    ``f'(w_p) = -i dt f(w_p)`` on (near-)degenerate pairs.
    """
    f = np.exp(-1j * w * dt)
    dw = w[..., :, None] - w[..., None, :]
    df = f[..., :, None] - f[..., None, :]
    degenerate = np.abs(dw) < DEGENERACY_TOL
    safe = np.where(degenerate, 1.0, dw)
    limit = np.broadcast_to(-1j * dt * f[..., :, None], df.shape)
    return np.where(degenerate, limit, df / safe)


def propagate_with_sensitivity(H, dt, Uf):
    """Forward/backward sweep for a ``(S, K, N, N)`` stack of slice Hamiltonians.

    Returns ``(L, Z)`` where ``L`` has shape ``(S,)`` and ``Z`` has shape
    ``(S, K, N, N)``. ``Z`` is chosen so that for any perturbation ``dH_k`` of
    slice ``k`` the first-order change in infidelity is
    ``-(2/N^2) Re tr(Z_k dH_k)``.
    """
    S, K, N, _ = H.shape
    w, V = np.linalg.eigh(H)
    Vh = np.conj(np.swapaxes(V, -1, -2))
    Uk = (V * np.exp(-1j * w * dt)[..., None, :]) @ Vh

    # fwd[:, k] = U_k ... U_1 (fwd[:, 0] = I); bwd[:, k] = Uf^dag U_K ... U_{k+1}
    fwd = np.empty((S, K + 1, N, N), dtype=complex)
    fwd[:, 0] = np.eye(N)
    for k in range(K):
        fwd[:, k + 1] = Uk[:, k] @ fwd[:, k]
    bwd = np.empty((S, K, N, N), dtype=complex)
    bwd[:, K - 1] = np.conj(Uf).T
    for k in range(K - 1, 0, -1):
        bwd[:, k - 1] = bwd[:, k] @ Uk[:, k]

    U = fwd[:, K]
    L = batch_infidelity(U, Uf)

    # d tr(Uf^dag U) = tr(M_k dU_k) with M_k = X_{k-1} P_k; in the eigenbasis
    # dU_k = V (Phi o V^dag dH V) V^dag, giving tr(Z_k dH_k) with
    # Z_k = V ((V^dag M_k V) o Phi^T) V^dag.
    M = fwd[:, :K] @ bwd
    Mt = Vh @ M @ V
    Phi = _divided_differences(w, dt)
    Z = V @ (Mt * np.swapaxes(Phi, -1, -2)) @ Vh
    return L, Z
