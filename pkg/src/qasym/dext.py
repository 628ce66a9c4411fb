"""Holevo's commutation operator and D-invariant extensions of SLD spans.

Quotient arithmetic modulo ``K_rho = {K : K rho = rho K = 0}`` is done
concretely by zeroing kernel x kernel blocks in the eigenbasis of ``rho``.
Projections use the real inner product ``<A, B>_rho = Re Tr rho (A o B)``
with ``A o B = (AB + BA) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConvergenceError, ValidationError

INVARIANCE_TOL = 1e-8
GRAM_MIN_EIG = 1e-10


@dataclass
class DExtension:
    """Observables ``X_1..X_r`` with Gaussian data.

    ``Sigma[i, j] = Tr(rho X_j X_i)``, ``A[i, j] = Tr(sqrt(rho) X_j sqrt(rho) X_i)``,
    ``F`` expresses the SLDs as ``L_k = sum_i F[i, k] X_i`` and ``tau = Sigma F``.
    """

    X: list
    F: np.ndarray
    Sigma: np.ndarray
    A: np.ndarray
    tau: np.ndarray
    rho: np.ndarray = field(repr=False, default=None)

    @property
    def r(self):
        return len(self.X)

    @property
    def d(self):
        return self.F.shape[1]

    def validate(self, atol=1e-10):
        if np.min(np.linalg.eigvalsh(self.Sigma.real)) <= atol:
            raise ValidationError("Re Sigma is not strictly positive definite")
        if self.rho is not None:
            means = [abs(np.trace(self.rho @ X)) for X in self.X]
            if max(means) > atol:
                raise ValidationError(f"observables are not zero-mean (max |Tr rho X| = {max(means):.3e})")
        if not np.allclose(self.tau, self.Sigma @ self.F, atol=0, rtol=0):
            raise ValidationError("tau != Sigma F")
        gm = linalg.conjugate_pair_mean(self.Sigma)
        top = np.linalg.eigvalsh(self.A - gm)[-1]
        if top > 1e-8:
            raise ValidationError(f"A exceeds Sigma # Sigma^T by {top:.3e}")
        return self


def commutation_apply(rho, X, cutoff=None):
    """Apply ``D_rho``: minimal-norm ``Y`` with ``rho Y + Y rho = i (rho X - X rho)``."""
    w, U = linalg.herm_eig(rho)
    if cutoff is None:
        cutoff = linalg.default_cutoff(w)
    Xt = U.conj().T @ X @ U
    s = w[:, None] + w[None, :]
    dlam = w[:, None] - w[None, :]
    mask = s >= cutoff
    Yt = np.zeros_like(Xt, dtype=complex)
    Yt[mask] = 1j * dlam[mask] / s[mask] * Xt[mask]
    return linalg.hermitian_part(U @ Yt @ U.conj().T)


def inner(rho, A, B):
    """``Re Tr rho (AB + BA) / 2``."""
    return float(np.real(np.trace(rho @ (A @ B + B @ A))) / 2)


def gram(rho, X_list):
    n = len(X_list)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = inner(rho, X_list[i], X_list[j])
    return G


def covariance(rho, X_list):
    """``Sigma[i, j] = Tr(rho X_j X_i)``."""
    n = len(X_list)
    S = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            S[i, j] = np.trace(rho @ X_list[j] @ X_list[i])
    return linalg.hermitian_part(S)


def cross_matrix(rho, X_list, cutoff=None):
    """``A[i, j] = Tr(sqrt(rho) X_j sqrt(rho) X_i)`` (real symmetric)."""
    sq = linalg.state_sqrt(rho, cutoff)
    n = len(X_list)
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = np.real(np.trace(sq @ X_list[j] @ sq @ X_list[i]))
    return 0.5 * (A + A.T)


def _projection(rho, basis, G_inv, Y):
    b = np.array([inner(rho, Xj, Y) for Xj in basis])
    c = G_inv @ b
    res = Y - sum(ci * Xi for ci, Xi in zip(c, basis))
    return c, res, np.sqrt(max(inner(rho, res, res), 0.0))


def _checked_gram(rho, X_list):
    G = gram(rho, X_list)
    wmin = float(np.linalg.eigvalsh(G)[0]) if len(G) else 0.0
    if wmin <= GRAM_MIN_EIG:
        raise ValidationError(
            f"observables are linearly dependent modulo the kernel of rho "
            f"(Gram min eigenvalue {wmin:.3e})"
        )
    return G


@dataclass
class InvarianceReport:
    invariant: bool
    residuals: list
    geometric_mean_gap: float
    Sigma: np.ndarray
    A: np.ndarray


def check_d_invariance(rho, X_list, tol=INVARIANCE_TOL, cutoff=None):
    """Test whether ``span_R{X_i}`` is ``D_rho``-invariant.

    Reports the L2(rho) norm of the part of each ``D_rho X_i`` outside the
    span, and ``max|A - Sigma # Sigma^T|``; the span is declared invariant
    when both are below ``tol``.
    """
    rho = linalg.check_hermitian(np.asarray(rho, dtype=complex), 1e-10, "rho")
    X_list = [linalg.check_hermitian(np.asarray(X, dtype=complex), 1e-10, "X") for X in X_list]
    G = _checked_gram(rho, X_list)
    G_inv = np.linalg.inv(G)
    residuals = []
    for X in X_list:
        _, _, nrm = _projection(rho, X_list, G_inv, commutation_apply(rho, X, cutoff))
        residuals.append(nrm)
    Sigma = covariance(rho, X_list)
    A = cross_matrix(rho, X_list, cutoff)
    gap = float(np.max(np.abs(A - linalg.conjugate_pair_mean(Sigma))))
    ok = max(residuals) < tol and gap < tol
    return InvarianceReport(bool(ok), residuals, gap, Sigma, A)


def build_d_extension(rho, L_list, tol=INVARIANCE_TOL, cutoff=None):
    """Greedy ``D_rho``-invariant closure of ``span{L_i}``.

    The SLDs are recentred to zero mean and kept as the first ``d`` elements,
    so ``F = [I_d; 0]``. Each new element is the L2(rho)-orthogonalized,
    normalized part of some ``D_rho X`` lying outside the current span.

    Raises
    ------
    ConvergenceError
        If closure is not reached within ``dim^2 - 1`` elements.
    """
    rho = linalg.check_hermitian(np.asarray(rho, dtype=complex), 1e-10, "rho")
    dim = rho.shape[0]
    eye = np.eye(dim)
    basis = []
    for L in L_list:
        L = linalg.hermitian_part(np.asarray(L, dtype=complex))
        basis.append(L - np.trace(rho @ L).real * eye)
    d = len(basis)
    if d == 0:
        raise ValidationError("need at least one SLD")
    cap = dim * dim - 1
    G = _checked_gram(rho, basis)
    G_inv = np.linalg.inv(G)
    k = 0
    while k < len(basis):
        Y = commutation_apply(rho, basis[k], cutoff)
        _, res, nrm = _projection(rho, basis, G_inv, Y)
        if nrm >= tol:
            if len(basis) >= cap:
                raise ConvergenceError(
                    "D-invariant closure exceeded dim^2 - 1 elements",
                    {"size": len(basis), "residual": nrm},
                )
            # second pass guards against loss of orthogonality
            _, res, nrm = _projection(rho, basis, G_inv, res)
            basis.append(linalg.hermitian_part(res / nrm))
            G = gram(rho, basis)
            G_inv = np.linalg.inv(G)
        k += 1
    rep = check_d_invariance(rho, basis, tol=max(tol, 1e-8), cutoff=cutoff)
    if not rep.invariant:
        raise ConvergenceError(
            "greedy closure did not pass the invariance check",
            {"residuals": rep.residuals, "geometric_mean_gap": rep.geometric_mean_gap},
        )
    return assemble(rho, basis, d)


def assemble(rho, X_list, d):
    """Gaussian data for observables whose first ``d`` entries are the SLDs."""
    r = len(X_list)
    F = np.zeros((r, d))
    F[:d, :d] = np.eye(d)
    Sigma = covariance(rho, X_list)
    A = cross_matrix(rho, X_list)
    return DExtension(list(X_list), F, Sigma, A, Sigma @ F, rho)


def rotate_extension(ext, rng, mix_sld=True):
    """Another D-extension of the same SLDs with the same span.

    The added elements ``X_{d+1..r}`` are replaced by a random invertible
    recombination of themselves, optionally mixed with the SLDs; the span
    (hence invariance) is unchanged while ``Sigma``, ``A`` and ``tau`` change.
    """
    d, r = ext.d, ext.r
    X = list(ext.X)
    if r > d:
        extra = r - d
        Q, _ = np.linalg.qr(rng.normal(size=(extra, extra)))
        scales = rng.uniform(0.5, 2.0, size=extra)
        M = Q * scales
        mix = rng.normal(size=(extra, d)) if mix_sld else np.zeros((extra, d))
        new = []
        for a in range(extra):
            Y = sum(M[a, b] * X[d + b] for b in range(extra))
            Y = Y + sum(mix[a, b] * X[b] for b in range(d))
            new.append(linalg.hermitian_part(Y))
        X = X[:d] + new
    return assemble(ext.rho, X, d)


def full_extension(rho, L_list):
    """Extension by an L2(rho)-orthonormal basis of all zero-mean observables.

    The whole zero-mean space is trivially ``D_rho``-invariant; this gives an
    extension independent of the greedy closure (``rho`` must be faithful).
    """
    rho = linalg.check_hermitian(np.asarray(rho, dtype=complex), 1e-10, "rho")
    dim = rho.shape[0]
    eye = np.eye(dim)
    basis = [linalg.hermitian_part(L) - np.trace(rho @ L).real * eye for L in L_list]
    d = len(basis)
    cands = []
    for j in range(dim):
        for k in range(dim):
            E = np.zeros((dim, dim), dtype=complex)
            if j == k:
                E[j, j] = 1
            elif j < k:
                E[j, k] = E[k, j] = 1
            else:
                E[j, k], E[k, j] = 1j, -1j
            cands.append(E - np.trace(rho @ E).real * eye)
    for E in cands:
        G_inv = np.linalg.inv(gram(rho, basis))
        _, res, nrm = _projection(rho, basis, G_inv, E)
        if nrm > 1e-6:
            basis.append(linalg.hermitian_part(res / nrm))
    return assemble(rho, basis, d)


def max_sandwich_gap(rho, X_list, Sigma, grid, n):
    """Max ``|lhs - rhs|`` of the sandwiched characteristic function over ``grid``.

    ``grid`` is an iterable of ``(xi, eta)`` pairs; the i.i.d. n-fold
    product is evaluated by per-site factorization.
    """
    from .asym import SiteFamily, sandwich_value

    fam = SiteFamily.iid(rho, X_list, Sigma=Sigma)
    gaps = [sandwich_value(fam, xi, eta, n)["gap"] for xi, eta in grid]
    return float(max(gaps)) if gaps else 0.0
