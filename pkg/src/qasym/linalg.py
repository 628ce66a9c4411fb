"""Dense complex-matrix kernels.

Every matrix function here goes through a single Hermitian eigendecomposition;
the matrices in this package are small (dimension <= 1024), so no Schur or
Pade paths are provided.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, ValidationError

HERMITIAN_ATOL = 1e-12
NEGATIVE_ATOL = 1e-12
GM_STABLE_ATOL = 1e-8

_FUNCTIONS = ("sqrt", "log", "exp", "abs", "inv-sqrt")


def as_square(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {A.shape}")
    return A


def max_asymmetry(H):
    """Largest entrywise deviation |H[j,k] - conj(H[k,j])|."""
    H = as_square(H)
    if H.size == 0:
        return 0.0
    return float(np.max(np.abs(H - H.conj().T)))


def hermitian_part(A):
    A = np.asarray(A)
    return 0.5 * (A + A.conj().T)


def check_hermitian(H, atol=HERMITIAN_ATOL, name="matrix"):
    """Return the Hermitian part of ``H`` or raise if it is not Hermitian within ``atol``."""
    H = as_square(H, name)
    asym = max_asymmetry(H)
    if asym > atol:
        raise ValidationError(
            f"{name} is not Hermitian: max asymmetry {asym:.3e} exceeds {atol:.1e}"
        )
    return hermitian_part(H)


def herm_eig(H, atol=HERMITIAN_ATOL):
    """Eigendecomposition ``H = U diag(w) U*`` of a Hermitian matrix.

    Parameters
    ----------
    H : array_like, shape (n, n)
        Hermitian matrix.
    atol : float
        Absolute tolerance on ``|H - H*|`` entries.

    Returns
    -------
    w : ndarray, shape (n,)
        Real eigenvalues in ascending order.
    U : ndarray, shape (n, n)
        Unitary matrix whose columns are the eigenvectors.
    """
    H = check_hermitian(H, atol)
    w, U = np.linalg.eigh(H)
    return w, U


def _from_eig(w, U, values):
    return (U * values) @ U.conj().T


def default_cutoff(w):
    """Kernel cutoff ``1e-10 * max(lambda)`` used for log and inverse square roots."""
    top = float(np.max(np.abs(w))) if len(w) else 0.0
    return 1e-10 * top


def matrix_function(H, f, cutoff=None, kernel="raise", neg_atol=NEGATIVE_ATOL, atol=HERMITIAN_ATOL):
    """Apply a scalar function to the spectrum of a Hermitian matrix.

    Parameters
    ----------
    H : array_like
        Hermitian matrix.
    f : {'sqrt', 'log', 'exp', 'abs', 'inv-sqrt'}
        Function tag.
    cutoff : float, optional
        Eigenvalues below this are treated as zero for 'log' and 'inv-sqrt'.
        Defaults to ``1e-10 * max|lambda|``.
    kernel : {'raise', 'exclude'}
        What to do with eigenvalues below ``cutoff`` for 'log' and 'inv-sqrt':
        raise, or map them to zero (the function is then taken on the support).
    neg_atol : float
        Negative eigenvalues down to ``-neg_atol`` are clamped to zero for
        'sqrt', 'log' and 'inv-sqrt'; anything more negative is an error.
    """
    if f not in _FUNCTIONS:
        raise ValidationError(f"unknown matrix function {f!r}; expected one of {_FUNCTIONS}")
    if kernel not in ("raise", "exclude"):
        raise ValidationError(f"unknown kernel policy {kernel!r}")
    w, U = herm_eig(H, atol)
    if f == "exp":
        return _from_eig(w, U, np.exp(w))
    if f == "abs":
        return _from_eig(w, U, np.abs(w))
    if len(w) and w[0] < -neg_atol:
        raise ValidationError(
            f"{f} requires a positive semidefinite matrix; smallest eigenvalue {w[0]:.3e}"
        )
    w = np.clip(w, 0.0, None)
    if f == "sqrt":
        return _from_eig(w, U, np.sqrt(w))
    if cutoff is None:
        cutoff = default_cutoff(w)
    small = w <= cutoff
    if np.any(small) and kernel == "raise":
        raise ValidationError(
            f"{f} of an eigenvalue {w[small][0]:.3e} below the kernel cutoff {cutoff:.3e}; "
            "pass kernel='exclude' to take the function on the support"
        )
    vals = np.zeros_like(w)
    good = ~small
    if f == "log":
        vals[good] = np.log(w[good])
    else:
        vals[good] = 1.0 / np.sqrt(w[good])
    return _from_eig(w, U, vals)


def state_sqrt(rho, cutoff=None):
    """Square root of a state with eigenvalues below the kernel cutoff set to zero."""
    w, U = herm_eig(rho)
    if cutoff is None:
        cutoff = default_cutoff(w)
    vals = np.where(w > cutoff, np.sqrt(np.clip(w, 0, None)), 0.0)
    return _from_eig(w, U, vals)


def expi(H, scale=1.0):
    """Unitary ``exp(1j * scale * H)`` for Hermitian ``H``."""
    w, U = herm_eig(H)
    return _from_eig(w, U, np.exp(1j * scale * w))


def support_projector(rho, cutoff=None):
    """Orthogonal projector onto eigenvectors of ``rho`` with eigenvalue above ``cutoff``."""
    w, U = herm_eig(rho)
    if cutoff is None:
        cutoff = default_cutoff(w)
    keep = w > cutoff
    Us = U[:, keep]
    return Us @ Us.conj().T


def is_psd(A, atol=1e-10):
    w = np.linalg.eigvalsh(hermitian_part(as_square(A)))
    return bool(len(w) == 0 or w[0] >= -atol)


def _check_psd(A, name, neg_atol):
    A = check_hermitian(A, name=name)
    w = np.linalg.eigvalsh(A)
    if len(w) and w[0] < -neg_atol:
        raise ValidationError(f"{name} is indefinite: smallest eigenvalue {w[0]:.3e}")
    return A, w


def _gm_invertible(A, B, neg_atol):
    a_half = matrix_function(A, "sqrt", neg_atol=neg_atol)
    a_mhalf = matrix_function(A, "inv-sqrt", kernel="raise", cutoff=0.0, neg_atol=neg_atol)
    inner = hermitian_part(a_mhalf @ B @ a_mhalf)
    mid = matrix_function(inner, "sqrt", neg_atol=max(neg_atol, 1e-10 * max(1.0, np.abs(inner).max())))
    return hermitian_part(a_half @ mid @ a_half)


def geometric_mean(A, B, neg_atol=NEGATIVE_ATOL, stable_atol=GM_STABLE_ATOL, invertible_rtol=1e-12,
                   eps0=None, max_halvings=60):
    """Operator geometric mean ``A # B`` of positive semidefinite matrices.

    For invertible ``A`` this is ``A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}``.
    For singular ``A`` the limit of ``(A + eps I) # B`` is taken, shrinking
    ``eps`` by a factor 4 until consecutive results agree within
    ``stable_atol`` (max-entry norm).

    Raises
    ------
    ValidationError
        If either argument is indefinite or not Hermitian.
    ConvergenceError
        If the regularized sequence does not stabilize.
    """
    A, wa = _check_psd(A, "A", neg_atol)
    B, wb = _check_psd(B, "B", neg_atol)
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch {A.shape} vs {B.shape}")
    n = A.shape[0]
    if n == 0:
        return np.zeros_like(A)
    scale = max(float(np.max(np.abs(wa))), float(np.max(np.abs(wb))), 1e-300)
    if wa[0] > invertible_rtol * scale:
        return _gm_invertible(A, B, neg_atol)
    eye = np.eye(n)
    eps = scale * 1e-2 if eps0 is None else eps0
    prev = _gm_invertible(A + eps * eye, B, neg_atol)
    for _ in range(max_halvings):
        eps /= 4.0
        cur = _gm_invertible(A + eps * eye, B, neg_atol)
        if np.max(np.abs(cur - prev)) < stable_atol:
            return cur
        prev = cur
    raise ConvergenceError(
        "geometric mean regularization did not stabilize",
        {"eps": eps, "last_change": float(np.max(np.abs(cur - prev)))},
    )


PURE_MODE_ATOL = 1e-13


def conjugate_pair_mean(J):
    """``J # J^T`` for ``J = V + iS`` with ``V`` positive definite.

    Uses the closed form ``V^{1/2} (I + (V^{-1/2} S V^{-1/2})^2)^{1/2} V^{1/2}``,
    which needs no regularization when ``S`` (and hence ``J``) is singular.
    The middle factor is ``U diag(sqrt(1 - s^2)) U^T`` from the singular values
    ``s <= 1`` of the whitened skew part; ``1 - s^2`` below ``PURE_MODE_ATOL``
    is rounding noise of an exactly pure mode and is set to zero, since its
    square root would otherwise inject errors of order 1e-8.
    The result is real symmetric.
    """
    J = check_hermitian(J, name="J")
    V = J.real
    S = J.imag
    v_half = matrix_function(V, "sqrt").real
    v_mhalf = matrix_function(V, "inv-sqrt", kernel="raise", cutoff=0.0).real
    Sv = v_mhalf @ S @ v_mhalf
    U, s, _ = np.linalg.svd(Sv)
    gap = 1.0 - s * s
    if len(gap) and gap.min() < -1e-8:
        raise ValidationError("J is not positive semidefinite (whitened skew part exceeds 1)")
    gap = np.where(gap < PURE_MODE_ATOL, 0.0, gap)
    mid = (U * np.sqrt(gap)) @ U.T
    out = v_half @ mid @ v_half
    return 0.5 * (out + out.T)


def trace_norm(A):
    """Sum of singular values of a square matrix."""
    A = as_square(A)
    if A.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def kron(*mats):
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, np.asarray(M))
    return out


def kron_power(A, n):
    out = np.ones((1, 1), dtype=np.asarray(A).dtype)
    for _ in range(n):
        out = np.kron(out, A)
    return out


def partial_trace(M, dims, keep):
    """Trace out all tensor factors not listed in ``keep``.

    Parameters
    ----------
    M : array_like, shape (D, D)
        Operator on ``H_0 (x) H_1 (x) ...`` with ``D = prod(dims)``.
    dims : sequence of int
        Factor dimensions.
    keep : sequence of int
        Indices of the factors to keep, in the output order they appear in ``dims``.
    """
    M = as_square(M)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != M.shape[0]:
        raise ValidationError(f"factor dimensions {dims} do not multiply to {M.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"keep indices {keep} out of range for {len(dims)} factors")
    nf = len(dims)
    T = M.reshape(dims + dims)
    traced = [k for k in range(nf) if k not in keep]
    # trace highest axes first so lower axis numbers stay valid
    cur = nf
    for k in sorted(traced, reverse=True):
        T = np.trace(T, axis1=k, axis2=k + cur)
        cur -= 1
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return T.reshape(dk, dk)


def random_hermitian(dim, rng, scale=1.0):
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * hermitian_part(Z)


def random_unitary(dim, rng):
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    Z = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = Z @ Z.conj().T
    return hermitian_part(rho / np.trace(rho).real)
