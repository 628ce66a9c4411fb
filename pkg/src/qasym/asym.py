"""Finite-n diagnostics for the asymptotic statements.

Every n-site quantity over a product state factorizes into per-site traces;
products are accumulated as sums of per-site logarithms so that n = 10^6 is
cheap and does not underflow. Only :func:`qlan_residual` materializes tensor
powers (total dimension at most 1024).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dext, gauss, linalg, model
from .errors import ValidationError

MAX_QLAN_DIM = 1024


@dataclass(frozen=True)
class SiteFamily:
    """Per-site states ``sigma^(k)`` and observables ``A^(k)`` (``k = 1..n``).

    For i.i.d. families ``state`` and ``observables`` are fixed; otherwise
    ``site(k)`` returns ``(sigma^(k), [A_1^(k), ...])``. ``Sigma`` is the
    limiting covariance ``Tr sigma A_j A_i``.
    """

    Sigma: np.ndarray
    state: Optional[np.ndarray] = None
    observables: Optional[tuple] = None
    site: Optional[Callable[[int], tuple]] = None

    @classmethod
    def iid(cls, rho, X_list, Sigma=None, atol=1e-10):
        rho = model.validate_density(rho)
        X = tuple(linalg.check_hermitian(np.asarray(A, dtype=complex), 1e-10, "observable")
                  for A in X_list)
        for A in X:
            mean = abs(np.trace(rho @ A))
            if mean > atol:
                raise ValidationError(f"site observable has nonzero mean {mean:.3e}")
        if Sigma is None:
            Sigma = dext.covariance(rho, list(X))
        return cls(np.asarray(Sigma, dtype=complex), rho, X, None)

    @property
    def r(self):
        return self.Sigma.shape[0]

    @property
    def is_iid(self):
        return self.site is None

    def at(self, k):
        if self.site is None:
            return self.state, self.observables
        return self.site(k)


def product_family(pm, theta0, cutoff=None):
    """Site family for a :class:`~qasym.model.ProductModel` at ``theta0``.

    Site observables are the site SLDs followed by the extra elements of a
    D-extension of the limiting site, each recentred by its own site mean.
    Returns ``(family, limiting_extension)``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    rho_inf = model.state_at(pm.limit, theta0)
    ext = dext.build_d_extension(rho_inf, model.sld(pm.limit, theta0), cutoff=cutoff)
    d = ext.d
    extra = ext.X[d:]
    eye = np.eye(pm.hilbert_dim)

    def site(k):
        sm = pm.site(k)
        s = model.state_at(sm, theta0)
        L = model.sld(sm, theta0)
        obs = [Lk - np.trace(s @ Lk).real * eye for Lk in L]
        obs += [D - np.trace(s @ D).real * eye for D in extra]
        return s, tuple(obs)

    return SiteFamily(ext.Sigma, None, None, site), ext


def _weyl(obs, xi, scale):
    H = sum(x * A for x, A in zip(xi, obs) if x != 0)
    if isinstance(H, int):
        return np.eye(obs[0].shape[0], dtype=complex)
    return linalg.expi(H, scale)


def _vec(fam, v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (fam.r,):
        raise ValidationError(f"expected a vector with {fam.r} components, got {v.shape}")
    return v


def log_product(factors):
    """Sum of logs of complex factors with the phase unwrapped along the sequence."""
    f = np.asarray(factors, dtype=complex)
    if np.any(f == 0):
        return complex(-np.inf)
    mag = np.sum(np.log(np.abs(f)))
    phase = np.sum(np.unwrap(np.angle(f)))
    return complex(mag, phase)


def _accumulate(fam, n, per_site):
    """``prod_{k=1..n} per_site(sigma^(k), A^(k))`` via log accumulation."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if fam.is_iid:
        f = per_site(fam.state, fam.observables)
        if f == 0:
            return 0j
        return complex(np.exp(n * np.log(complex(f))))
    logs = [per_site(*fam.at(k)) for k in range(1, n + 1)]
    return complex(np.exp(log_product(logs)))


def sandwich_value(fam, xi, eta, n):
    """Sandwiched characteristic function against its Gaussian limit.

    ``lhs = prod_k Tr sqrt(s_k) W_k(xi) sqrt(s_k) W_k(eta)`` with
    ``W_k(xi) = exp(i xi . A^(k) / sqrt(n))``, and
    ``rhs = exp(-(xi, eta)^T [[Sigma, Sigma#Sigma^T], [Sigma#Sigma^T, Sigma^T]] (xi, eta) / 2)``.
    """
    xi, eta = _vec(fam, xi), _vec(fam, eta)
    scale = 1.0 / np.sqrt(n)

    def per_site(s, obs):
        sq = linalg.state_sqrt(s)
        return np.trace(sq @ _weyl(obs, xi, scale) @ sq @ _weyl(obs, eta, scale))

    lhs = _accumulate(fam, n, per_site)
    Sig = fam.Sigma
    gm = linalg.conjugate_pair_mean(Sig)
    quad = xi @ Sig.real @ xi + eta @ Sig.real @ eta + 2 * xi @ gm @ eta
    rhs = complex(np.exp(-0.5 * quad))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def iid_extension_family(m, theta0, ext=None):
    rho = model.state_at(m, theta0)
    if ext is None:
        ext = dext.build_d_extension(rho, model.sld(m, theta0))
    return SiteFamily.iid(rho, ext.X, Sigma=ext.Sigma), ext


def quasi_char_finite_n(m, theta0, h, xis, n, ext=None):
    """Quasi-characteristic function of ``X^(n)`` under the shifted product state.

    ``finite_n = prod_k Tr sigma^(k)_{theta0 + h/sqrt(n)} prod_t exp(i xi_t . A^(k) / sqrt(n))``,
    compared with the Gaussian shift limit ``N((Re tau) h, Sigma)``.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != theta0.shape:
        raise ValidationError("h and theta0 must have the same length")
    theta_n = theta0 + h / np.sqrt(n)
    scale = 1.0 / np.sqrt(n)
    if isinstance(m, model.ProductModel):
        fam, ext = product_family(m, theta0)
        xs = [_vec(fam, x) for x in xis]

        def factor(k):
            sm = m.site(k)
            if not sm.in_domain(theta_n):
                raise ValidationError(f"theta0 + h/sqrt(n) outside the domain of site {k}")
            s_shift = model.state_at(sm, theta_n)
            _, obs = fam.at(k)
            P = np.eye(s_shift.shape[0], dtype=complex)
            for x in xs:
                P = P @ _weyl(obs, x, scale)
            return np.trace(s_shift @ P)

        finite = complex(np.exp(log_product([factor(k) for k in range(1, n + 1)])))
    else:
        fam, ext = iid_extension_family(m, theta0, ext)
        xs = [_vec(fam, x) for x in xis]
        if not m.in_domain(theta_n):
            raise ValidationError("theta0 + h/sqrt(n) is outside the model domain")
        s_shift = model.state_at(m, theta_n)
        P = np.eye(s_shift.shape[0], dtype=complex)
        for x in xs:
            P = P @ _weyl(fam.observables, x, scale)
        f = np.trace(s_shift @ P)
        finite = complex(np.exp(n * np.log(complex(f))))
    spec = gauss.GaussianShiftSpec.from_extension(ext)
    limit = gauss.quasi_char_function(spec, h, xs)
    return {"finite_n": finite, "limit": limit, "gap": abs(finite - limit)}


def weyl_residual(fam, xi, eta, n):
    """``2 - 2 Re{exp(i xi^T S eta) Tr rho W(-eta) W(-xi) W(xi + eta)}`` with ``S = Im Sigma``."""
    xi, eta = _vec(fam, xi), _vec(fam, eta)
    scale = 1.0 / np.sqrt(n)

    def per_site(s, obs):
        P = _weyl(obs, -eta, scale) @ _weyl(obs, -xi, scale) @ _weyl(obs, xi + eta, scale)
        return np.trace(s @ P)

    prod = _accumulate(fam, n, per_site)
    S = fam.Sigma.imag
    val = 2.0 - 2.0 * np.real(np.exp(1j * xi @ S @ eta) * prod)
    return float(val)


def local_sum(op, n):
    """``sum_k I^(k-1) (x) op (x) I^(n-k)`` on ``n`` sites."""
    dim = op.shape[0]
    out = np.zeros((dim**n, dim**n), dtype=complex)
    for k in range(n):
        out += linalg.kron(np.eye(dim**k), op, np.eye(dim ** (n - k - 1)))
    return out


def qlan_residual(m, theta0, h, n):
    """L2(rho^n) size of the remainder in the expansion of ``log R^2``.

    ``residual = sqrt(Tr rho^n E^2)`` with ``E = P (2 log R - h.Delta + h^T J h / 2) P``,
    ``R`` the square-root likelihood ratio of ``rho_{theta0 + h/sqrt(n)}^n``
    relative to ``rho_{theta0}^n``, ``Delta_i = sum_k L_i^(k) / sqrt(n)`` and
    ``P`` the support projector of ``rho_{theta0}^n``.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    dim = m.hilbert_dim
    if n < 1 or dim**n > MAX_QLAN_DIM:
        raise ValidationError(f"total dimension {dim}^{n} exceeds the cap {MAX_QLAN_DIM}")
    rho = model.state_at(m, theta0)
    sig = model.state_at(m, theta0 + h / np.sqrt(n))
    L = model.sld(m, theta0)
    J = model.fisher_from(rho, L)
    rho_n = linalg.kron_power(rho, n)
    sig_n = linalg.kron_power(sig, n)
    dec = model.lebesgue_decomposition(rho_n, sig_n)
    w, U = np.linalg.eigh(rho_n)
    cutoff = linalg.default_cutoff(w)
    Us = U[:, w > cutoff]
    P = Us @ Us.conj().T
    Rs = linalg.hermitian_part(Us.conj().T @ dec.R @ Us)
    log_r2 = Us @ (2 * linalg.matrix_function(Rs, "log", kernel="exclude")) @ Us.conj().T
    lin = sum(hi * local_sum(Li, n) for hi, Li in zip(h, L)) / np.sqrt(n)
    lin = lin - 0.5 * float(h @ J @ h) * np.eye(dim**n)
    E = linalg.hermitian_part(P @ (log_r2 - lin) @ P)
    residual = float(np.sqrt(max(np.real(np.trace(rho_n @ E @ E)), 0.0)))
    return {
        "residual": residual,
        "singular_mass": float(np.real(np.trace(dec.singular))),
        "absolutely_continuous_mass": float(np.real(np.trace(rho_n @ dec.R @ dec.R))),
        "log_term_norm": float(np.sqrt(max(np.real(np.trace(rho_n @ P @ log_r2 @ P @ log_r2)), 0.0))),
        "decomposition_residual": dec.residual,
    }


def no_limit_povm_demo(h_values, n, quad_nodes=80):
    """Binary POVM ``{rho_0^n, I - rho_0^n}`` on the pure one-parameter model.

    For each ``h``: ``finite_n_prob = (Tr rho_{h/sqrt(n)} rho_0)^n``, the
    limit ``exp(-h^2/4)``, and a Gauss-Hermite check that the would-be
    limiting test ``m(x) = sqrt(2) exp(-x^2/2)`` reproduces the limit against
    ``N(h, 1)`` even though ``max m = sqrt(2) > 1``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    m = model.builtin("pure_1d")
    rho0 = model.state_at(m, [0.0])
    t, wts = np.polynomial.hermite.hermgauss(quad_nodes)
    rows = []
    for h in h_values:
        h = float(h)
        tr = np.real(np.trace(model.state_at(m, [h / np.sqrt(n)]) @ rho0))
        finite = float(np.exp(n * np.log1p(tr - 1.0)))
        limit = float(np.exp(-h * h / 4))
        # x = h + sqrt(2) t turns the N(h, 1) density into the Hermite weight
        x = h + np.sqrt(2.0) * t
        quad = float(np.sum(wts * np.sqrt(2.0) * np.exp(-x * x / 2)) / np.sqrt(np.pi))
        rows.append({
            "h": h,
            "finite_n_prob": finite,
            "limit_prob": limit,
            "m_quadrature": quad,
            "m_check_gap": abs(quad - limit),
            "m_max": float(np.sqrt(2.0)),
        })
    return rows
