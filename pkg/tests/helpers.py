"""Random instance generators shared by the tests."""

import numpy as np

from qasym import linalg


def random_psd(dim, rng, rank=None):
    rank = dim if rank is None else rank
    Z = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return linalg.hermitian_part(Z @ Z.conj().T)


def random_real_pd(dim, rng, floor=0.2):
    A = rng.normal(size=(dim, dim))
    return A @ A.T + floor * np.eye(dim)


def random_skew(dim, rng):
    A = rng.normal(size=(dim, dim))
    return A - A.T


def random_covariance(r, rng):
    """Complex PSD ``r x r`` with positive definite real part."""
    return random_psd(r, rng) + 0.1 * np.eye(r)


def traceless_hermitian(dim, rng):
    B = linalg.random_hermitian(dim, rng)
    return B - np.trace(B).real / dim * np.eye(dim)


def superoperator_commutation(rho, X):
    """``D_rho X`` by pseudo-inverting ``L_rho + R_rho`` on column-stacked vectors."""
    dim = rho.shape[0]
    eye = np.eye(dim)
    left = np.kron(eye, rho)
    right = np.kron(rho.T, eye)
    rhs = 1j * (left - right) @ X.reshape(-1, order="F")
    y = np.linalg.pinv(left + right, rcond=1e-12) @ rhs
    return y.reshape(dim, dim, order="F")


def random_quantum_covariance(r, rng, shrink, min_sv=0.02):
    """``V + iS`` with invertible, well-conditioned skew part and ``V + iS > 0``.

    The whitened skew part has largest singular value ``shrink``; draws whose
    smallest singular value falls below ``min_sv`` are resampled, since a nearly
    classical mode with singular value ``s`` costs ~1/s^2 in determinant precision.
    """
    while True:
        V = random_real_pd(r, rng, floor=0.5)
        S = random_skew(r, rng)
        vh = np.real(linalg.matrix_function(V, "inv-sqrt"))
        sv = np.linalg.svd(vh @ S @ vh, compute_uv=False)
        if sv[-1] * shrink / sv[0] >= min_sv:
            return V + 1j * (shrink / sv[0]) * S
