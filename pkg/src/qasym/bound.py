"""The asymptotic representation bound and its optimal limiting covariance.

The bound is

    min_K  Tr(G Re Z) + Tr|sqrt(G) Im Z sqrt(G)|,   Z = K^T Sigma K,  K^T Re(tau) = I,

which equals ``min Tr(G V)`` over real symmetric ``V`` and real ``K`` with
``V >= K^T Sigma K``. The latter is solved here with a log-det barrier on the
block matrix ``[[V, K^T Sigma^{1/2}], [Sigma^{1/2} K, I_r]] >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import dext, linalg, model
from .errors import ConvergenceError, ValidationError

# squared Newton decrement below which undamped steps are taken
QUADRATIC_REGION = 0.25
# squared Newton decrement accepted as centred once it stops shrinking (roundoff floor)
CENTRED_DECREMENT = 1e-9

@dataclass
class BarrierOptions:
    mu0: float = 1.0
    factor: float = 0.25
    tol: float = 1e-9
    max_outer: int = 200
    max_newton: int = 100
    newton_tol: float = 1e-14


@dataclass
class BoundResult:
    value: float
    K_star: np.ndarray
    Z_star: np.ndarray
    V_star: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _weight(G, d):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape != (d, d):
        raise ValidationError(f"weight must be {d}x{d}, got {G.shape}")
    if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.abs(G).max()):
        raise ValidationError("weight must be symmetric")
    G = 0.5 * (G + G.T)
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise ValidationError("weight must be positive definite")
    return G


def objective(G, Z):
    """``Tr(G Re Z) + Tr|sqrt(G) Im Z sqrt(G)|``."""
    g = linalg.matrix_function(G, "sqrt").real
    return float(np.trace(G @ Z.real) + linalg.trace_norm(g @ Z.imag @ g))


def optimal_covariance_from(Z, G):
    """``Re Z + G^{-1/2} |G^{1/2} Im Z G^{1/2}| G^{-1/2}`` (real symmetric)."""
    g = linalg.matrix_function(G, "sqrt").real
    gi = linalg.matrix_function(G, "inv-sqrt", cutoff=0.0).real
    M = g @ Z.imag @ g
    # i M is Hermitian for real skew M; |M| = |iM|
    absM = linalg.matrix_function(1j * M, "abs").real
    V = Z.real + gi @ absM @ gi
    return 0.5 * (V + V.T)


def _setup(Sigma, tau):
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=complex))
    tau = np.atleast_2d(np.asarray(tau, dtype=complex))
    r = Sigma.shape[0]
    if Sigma.shape != (r, r) or tau.shape[0] != r:
        raise ValidationError(f"inconsistent shapes Sigma {Sigma.shape}, tau {tau.shape}")
    d = tau.shape[1]
    if d > r:
        raise ValidationError(f"tau has more columns ({d}) than rows ({r})")
    if linalg.max_asymmetry(Sigma) > 1e-10:
        raise ValidationError("Sigma must be Hermitian")
    Sigma = linalg.hermitian_part(Sigma)
    if np.linalg.eigvalsh(Sigma)[0] < -1e-10:
        raise ValidationError("Sigma must be positive semidefinite")
    if np.linalg.eigvalsh(Sigma.real)[0] <= 1e-10:
        raise ValidationError("Re Sigma must be positive definite")
    T = tau.real
    if np.linalg.matrix_rank(T, tol=1e-10 * max(1.0, np.abs(T).max())) < d:
        raise ValidationError("Re tau must have rank d")
    # K = Kp + N B satisfies K^T T = I for every B
    Kp = T @ np.linalg.inv(T.T @ T)
    N = scipy.linalg.null_space(T.T)
    return Sigma, T, Kp, N


class _Block:
    """Affine map x -> M(x) = M0 + sum_k x_k Mk, with x = (upper(V), vec(B))."""

    def __init__(self, Sigma, Kp, N, d):
        r = Sigma.shape[0]
        self.d, self.r = d, r
        self.nb = N.shape[1]
        sh = linalg.matrix_function(Sigma, "sqrt", neg_atol=1e-10)
        size = d + r
        M0 = np.zeros((size, size), dtype=complex)
        M0[d:, d:] = np.eye(r)
        low = sh @ Kp
        M0[d:, :d] = low
        M0[:d, d:] = low.conj().T
        self.M0 = M0
        mats, cost_idx = [], []
        self.v_index = []
        for i in range(d):
            for j in range(i, d):
                E = np.zeros((size, size), dtype=complex)
                E[i, j] = E[j, i] = 1.0
                mats.append(E)
                self.v_index.append((i, j))
        for a in range(self.nb):
            for j in range(d):
                Bm = np.zeros((self.nb, d))
                Bm[a, j] = 1.0
                low = sh @ N @ Bm
                E = np.zeros((size, size), dtype=complex)
                E[d:, :d] = low
                E[:d, d:] = low.conj().T
                mats.append(E)
        self.mats = np.array(mats)
        self.nv = len(self.v_index)

    def cost(self, G):
        c = np.zeros(len(self.mats))
        for k, (i, j) in enumerate(self.v_index):
            c[k] = G[i, i] if i == j else 2 * G[i, j]
        return c

    def matrix(self, x):
        return self.M0 + np.tensordot(x, self.mats, axes=1)

    def unpack(self, x, Kp, N):
        V = np.zeros((self.d, self.d))
        for k, (i, j) in enumerate(self.v_index):
            V[i, j] = V[j, i] = x[k]
        B = x[self.nv:].reshape(self.nb, self.d) if self.nb else np.zeros((0, self.d))
        return V, Kp + N @ B

    def pack(self, V, B):
        v = [V[i, j] for i, j in self.v_index]
        return np.concatenate([np.asarray(v, dtype=float), np.ravel(B)])


def _chol(M):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _barrier_solve(blk, c, x, opts):
    size = blk.M0.shape[0]
    mu = opts.mu0
    iters = 0
    outer = 0
    while True:
        outer += 1
        centred = False
        prev = np.inf
        for _ in range(opts.max_newton):
            M = blk.matrix(x)
            Lc = _chol(M)
            if Lc is None:
                raise ConvergenceError("barrier iterate left the feasible region", {"mu": mu})
            Minv = scipy.linalg.cho_solve((Lc, True), np.eye(size))
            P = np.einsum("ab,kbc->kac", Minv, blk.mats)
            grad = c / mu - np.real(np.einsum("kaa->k", P))
            H = np.real(np.einsum("kab,lba->kl", P, P))
            try:
                step = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec2 = float(-grad @ step)
            iters += 1
            if dec2 / 2 <= opts.newton_tol or (dec2 < CENTRED_DECREMENT and dec2 > 0.5 * prev):
                # converged, or stagnating at the roundoff floor of grad ~ c / mu
                centred = True
                break
            prev = dec2
            if dec2 < QUADRATIC_REGION:
                # self-concordance: a full step stays feasible and converges quadratically,
                # whereas an Armijo test on f ~ 1/mu would stall in roundoff
                xn = x + step
                if _chol(blk.matrix(xn)) is not None:
                    x = xn
                    continue
            f0 = c @ x / mu - 2 * np.sum(np.log(np.real(np.diag(Lc))))
            t = 1.0
            while t > 1e-20:
                xn = x + t * step
                Ln = _chol(blk.matrix(xn))
                if Ln is not None:
                    fn = c @ xn / mu - 2 * np.sum(np.log(np.real(np.diag(Ln))))
                    if fn <= f0 - 0.25 * t * dec2:
                        break
                t *= 0.5
            else:
                # no descent left at working precision
                centred = dec2 / 2 <= CENTRED_DECREMENT
                break
            x = xn
        if centred and mu * size < opts.tol:
            return x, mu, iters, outer
        if outer >= opts.max_outer:
            raise ConvergenceError(
                "barrier method hit the outer iteration cap",
                {"mu": mu, "iterations": iters},
            )
        if centred:
            mu *= opts.factor


def rep_bound(Sigma, tau, G, options=None):
    """Asymptotic representation bound for ``N((Re tau) h, Sigma)`` and weight ``G``.

    Returns a :class:`BoundResult` whose ``value`` is recomputed from the
    minimizer ``K_star`` through the closed-form objective, together with
    ``Z_star = K^T Sigma K`` and ``V_star``.
    """
    opts = options or BarrierOptions()
    Sigma, T, Kp, N = _setup(Sigma, tau)
    d = T.shape[1]
    G = _weight(G, d)
    blk = _Block(Sigma, Kp, N, d)
    Z0 = Kp.T @ Sigma @ Kp
    V0 = (np.linalg.norm(Z0, 2) + 1.0) * np.eye(d)
    # the barrier path does not depend on the cost scale; normalizing makes tol relative
    scale = float(np.trace(G @ V0))
    c = blk.cost(G) / scale
    x0 = blk.pack(V0, np.zeros((N.shape[1], d)))
    x, mu, iters, outer = _barrier_solve(blk, c, x0, opts)
    V_bar, K = blk.unpack(x, Kp, N)
    Z = linalg.hermitian_part(K.T @ Sigma @ K)
    value = objective(G, Z)
    V_star = optimal_covariance_from(Z, G)
    diag = {
        "newton_iterations": iters,
        "outer_iterations": outer,
        "final_mu": mu,
        "gap_estimate": mu * blk.M0.shape[0] * scale,
        "barrier_value": float(np.trace(G @ V_bar)),
        "constraint_residual": float(np.max(np.abs(K.T @ T - np.eye(d)))),
    }
    return BoundResult(value, K, Z, V_star, diag)


def optimal_covariance(res, G, atol=1e-8):
    """``V_star`` for a bound result, certified against ``value`` and ``Z_star``.

    Raises
    ------
    ConvergenceError
        If ``Tr(G V_star) != value`` or ``V_star - Z_star`` is not PSD within ``atol``.
    """
    G = _weight(G, res.Z_star.shape[0])
    V = optimal_covariance_from(res.Z_star, G)
    trace_gap = abs(float(np.trace(G @ V)) - res.value)
    min_eig = float(np.linalg.eigvalsh(linalg.hermitian_part(V - res.Z_star))[0])
    if trace_gap > atol or min_eig < -atol:
        raise ConvergenceError(
            "optimal covariance failed certification",
            {"trace_gap": trace_gap, "min_eig": min_eig},
        )
    return V


def direct_search(Sigma, tau, G, restarts=8, seed=0):
    """Nelder-Mead minimization of the closed-form objective over ``K``.

    Independent check on :func:`rep_bound`: works on the nonsmooth objective
    directly, with no barrier and no epigraph variable.
    """
    Sigma, T, Kp, N = _setup(Sigma, tau)
    d = T.shape[1]
    G = _weight(G, d)
    nb = N.shape[1]

    def f(b):
        K = Kp + N @ b.reshape(nb, d)
        return objective(G, K.T @ Sigma @ K)

    if nb == 0:
        return f(np.zeros(0)), Kp
    rng = np.random.default_rng(seed)
    best = None
    start = np.zeros(nb * d)
    for k in range(restarts):
        x0 = start if k == 0 else best.x + rng.normal(scale=0.5 / k, size=nb * d)
        res = scipy.optimize.minimize(
            f, x0, method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 40000, "maxfev": 80000,
                     "adaptive": True},
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.fun), Kp + N @ best.x.reshape(nb, d)


def holevo_bound_iid(m, theta0, G, options=None):
    """Holevo bound of the base model: SLDs -> D-extension -> :func:`rep_bound`."""
    rho = model.state_at(m, theta0)
    L = model.sld(m, theta0)
    ext = dext.build_d_extension(rho, L)
    res = rep_bound(ext.Sigma, ext.tau, G, options)
    res.diagnostics["r"] = ext.r
    return res
