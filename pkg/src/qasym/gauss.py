"""Quantum Gaussian shift family ``N((Re tau) h, Sigma)``.

Convention: ``Sigma[i, j] = phi(X_j X_i)``, ``V = Re Sigma`` and
``S = Im Sigma`` (real skew), so the Weyl operators obey
``W(xi) W(eta) = exp(i xi^T S eta) W(xi + eta)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import ValidationError

SKEW_ZERO = 1e-10


@dataclass(frozen=True)
class GaussianShiftSpec:
    Sigma: np.ndarray
    tau: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=complex))
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        tau = np.atleast_2d(np.asarray(self.tau, dtype=complex))
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "tau", tau)
        r = Sigma.shape[0]
        if Sigma.shape != (r, r) or tau.shape[0] != r or F.shape != tau.shape:
            raise ValidationError(
                f"inconsistent shapes Sigma {Sigma.shape}, tau {tau.shape}, F {F.shape}"
            )
        asym = linalg.max_asymmetry(Sigma)
        if asym > 1e-10:
            raise ValidationError(f"Sigma not Hermitian (asymmetry {asym:.3e})")
        w = np.linalg.eigvalsh(linalg.hermitian_part(Sigma))
        if w[0] < -1e-10:
            raise ValidationError(f"Sigma not positive semidefinite (min eigenvalue {w[0]:.3e})")
        if np.linalg.eigvalsh(Sigma.real)[0] <= 1e-10:
            raise ValidationError("Re Sigma is not strictly positive definite")
        if np.max(np.abs(tau - Sigma @ F)) > 1e-12 * max(1.0, np.abs(tau).max()):
            raise ValidationError("tau must equal Sigma F")

    @classmethod
    def from_extension(cls, ext):
        return cls(ext.Sigma, ext.tau, ext.F)

    @classmethod
    def from_sigma(cls, Sigma, F=None):
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=complex))
        F = np.eye(Sigma.shape[0]) if F is None else np.atleast_2d(np.asarray(F, dtype=float))
        return cls(Sigma, Sigma @ F, F)

    @property
    def r(self):
        return self.Sigma.shape[0]

    @property
    def d(self):
        return self.F.shape[1]

    @property
    def V(self):
        return self.Sigma.real

    @property
    def S(self):
        return self.Sigma.imag

    def mean(self, h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if h.shape != (self.d,):
            raise ValidationError(f"shift must have {self.d} components")
        return self.tau.real @ h


def _vec(spec, xi):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (spec.r,):
        raise ValidationError(f"xi must have {spec.r} components, got {xi.shape}")
    return xi


def char_function(spec, h, xi):
    """``exp(i xi . m - xi^T V xi / 2)`` with ``m = (Re tau) h``."""
    xi = _vec(spec, xi)
    m = spec.mean(h)
    return complex(np.exp(1j * xi @ m - 0.5 * xi @ spec.V @ xi))


def quasi_char_function(spec, h, xis):
    """Expectation of the ordered product ``W(xi_1) ... W(xi_T)``.

    ``exp(sum_t (i xi_t . m - xi_t^T V xi_t / 2) - sum_{t<u} xi_u^T Sigma xi_t)``.
    """
    xis = [_vec(spec, x) for x in xis]
    if not xis:
        raise ValidationError("need at least one xi")
    m = spec.mean(h)
    expo = 0j
    for t, x in enumerate(xis):
        expo += 1j * x @ m - 0.5 * x @ spec.V @ x
        for y in xis[t + 1:]:
            expo -= y @ spec.Sigma @ x
    return complex(np.exp(expo))


@dataclass
class Purity:
    tr_rho_sq: float
    is_pure: bool
    det_V: float
    det_S: float


def purity(Sigma, rtol=1e-8):
    """``Tr rho^2 = sqrt(det S / det V)`` for ``N(0, Sigma)`` with invertible ``S``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=complex))
    V, S = Sigma.real, Sigma.imag
    if len(S) == 0 or np.linalg.svd(S, compute_uv=False)[-1] <= SKEW_ZERO:
        raise ValidationError(
            "Im Sigma is singular; split off the classical part with "
            "split_classical_quantum first and pass the quantum block"
        )
    det_v = float(np.linalg.det(V))
    det_s = float(np.linalg.det(S))
    if det_v <= 0:
        raise ValidationError("Re Sigma must be positive definite")
    tr = float(np.sqrt(max(det_s, 0.0) / det_v))
    return Purity(tr, bool(abs(det_v - det_s) <= rtol * abs(det_v)), det_v, det_s)


def doubled_covariance(J):
    """``[[J, J # J^T], [J # J^T, J^T]]``."""
    J = np.atleast_2d(np.asarray(J, dtype=complex))
    gm = linalg.conjugate_pair_mean(J)
    return np.block([[J, gm], [gm, J.T]])


@dataclass
class SplitForm:
    transform: np.ndarray
    r_c: int
    r_q: int
    Sigma_c: np.ndarray
    Sigma_q: np.ndarray
    condition: float


def split_classical_quantum(Sigma, threshold=SKEW_ZERO):
    """Real change of basis ``T`` with ``T^T Sigma T = Sigma_c (+) Sigma_q``.

    After whitening by ``(Re Sigma)^{-1/2}`` the skew part is brought to real
    Schur normal form; zero blocks come first, then 2x2 blocks
    ``[[0, b], [-b, 0]]`` with ``b > 0`` sorted by ``b`` descending.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=complex))
    V, S = Sigma.real, Sigma.imag
    r = V.shape[0]
    if np.linalg.eigvalsh(V)[0] <= 1e-10:
        raise ValidationError("Re Sigma is not strictly positive definite")
    W = linalg.matrix_function(V, "inv-sqrt", cutoff=0.0).real
    Sp = W @ S @ W
    Sp = 0.5 * (Sp - Sp.T)
    T, Z, sdim = scipy.linalg.schur(Sp, output="real", sort=lambda re, im: abs(im) <= threshold)
    cols = [Z[:, k] for k in range(sdim)]
    blocks = []
    k = sdim
    while k < r:
        if k + 1 < r and abs(T[k + 1, k]) > threshold:
            b = T[k, k + 1]
            u, v = Z[:, k], Z[:, k + 1]
            if b < 0:
                u, v, b = v, u, -b
            blocks.append((b, u, v))
            k += 2
        else:
            # an isolated eigenvalue that the sort left behind is numerically zero
            cols.append(Z[:, k])
            k += 1
    r_c = len(cols)
    blocks.sort(key=lambda t: -t[0])
    for _, u, v in blocks:
        cols.extend([u, v])
    P = np.column_stack(cols) if cols else np.zeros((r, 0))
    transform = W @ P
    out = transform.T @ Sigma @ transform
    out = linalg.hermitian_part(out)
    Sigma_c = out[:r_c, :r_c].real
    Sigma_q = out[r_c:, r_c:]
    return SplitForm(transform, r_c, r - r_c, Sigma_c, Sigma_q, float(np.linalg.cond(transform)))
