"""Parametric quantum statistical models, SLDs and SLD Fisher information.

A model is a map ``theta -> rho_theta`` on an open parameter domain. Four
families are built in (see :func:`builtin`), and affine models
``rho0 + sum_i theta^i B_i`` can be loaded from a JSON model file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .errors import ValidationError

STATE_ATOL = 1e-10
FD_STEP = 1e-5

I2 = np.eye(2, dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class ParametricModel:
    """Immutable description of ``theta -> rho_theta``.

    ``derivative_fn(theta, i)`` returns the analytic ``d rho / d theta^i`` when
    given; otherwise :func:`derivative` falls back to finite differences.
    ``margin_fn(theta)`` returns a positive number for interior points; its
    sign is the domain predicate.
    """

    name: str
    hilbert_dim: int
    param_dim: int
    state_fn: Callable[[np.ndarray], np.ndarray]
    derivative_fn: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    margin_fn: Optional[Callable[[np.ndarray], float]] = None
    params: dict = field(default_factory=dict)

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,) or not np.all(np.isfinite(theta)):
            return False
        return self.margin_fn is None or self.margin_fn(theta) > 0


@dataclass(frozen=True)
class ProductModel:
    """Non-i.i.d. product family ``rho^(n)_theta = (x)_k sigma^(k)_theta``.

    Stored as the per-site sequence ``site(k)`` (``k = 1, 2, ...``) plus the
    limiting site model; no tensor product is materialized.
    """

    name: str
    site: Callable[[int], ParametricModel]
    limit: ParametricModel
    params: dict = field(default_factory=dict)

    @property
    def hilbert_dim(self):
        return self.limit.hilbert_dim

    @property
    def param_dim(self):
        return self.limit.param_dim


def _as_theta(m, theta):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (m.param_dim,):
        raise ValidationError(f"{m.name}: expected {m.param_dim} parameters, got {theta.shape[0]}")
    return theta


def validate_density(rho, atol=STATE_ATOL, name="state"):
    """Check Hermitian, PSD and unit trace within ``atol``; return the Hermitian part."""
    rho = linalg.as_square(np.asarray(rho, dtype=complex), name)
    asym = linalg.max_asymmetry(rho)
    if asym > atol:
        raise ValidationError(f"{name} not Hermitian (asymmetry {asym:.3e})")
    rho = linalg.hermitian_part(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValidationError(f"{name} trace {tr:.12g} differs from 1")
    wmin = np.linalg.eigvalsh(rho)[0]
    if wmin < -atol:
        raise ValidationError(f"{name} not positive semidefinite (min eigenvalue {wmin:.3e})")
    return rho


def state_at(m, theta):
    """Density matrix of model ``m`` at ``theta`` (validated)."""
    theta = _as_theta(m, theta)
    if not m.in_domain(theta):
        raise ValidationError(f"{m.name}: theta={theta.tolist()} outside the parameter domain")
    return validate_density(m.state_fn(theta), name=f"{m.name} state")


def _fd(m, theta, i, h):
    e = np.zeros(m.param_dim)
    e[i] = h
    return (m.state_fn(theta + e) - m.state_fn(theta - e)) / (2 * h)


def derivative(m, theta, i, step=FD_STEP):
    """``d rho_theta / d theta^i`` as a Hermitian matrix.

    Analytic when the model provides it; otherwise a central difference with
    step ``step`` and one Richardson pass ``(4 D(h/2) - D(h)) / 3``.
    """
    theta = _as_theta(m, theta)
    if not 0 <= i < m.param_dim:
        raise ValidationError(f"parameter index {i} out of range")
    if not m.in_domain(theta):
        raise ValidationError(f"{m.name}: theta={theta.tolist()} outside the parameter domain")
    if m.derivative_fn is not None:
        return linalg.hermitian_part(np.asarray(m.derivative_fn(theta, i), dtype=complex))
    e = np.zeros(m.param_dim)
    e[i] = step
    if not (m.in_domain(theta + e) and m.in_domain(theta - e)):
        raise ValidationError(
            f"{m.name}: theta={theta.tolist()} too close to the domain boundary for step {step}"
        )
    d = (4 * _fd(m, theta, i, step / 2) - _fd(m, theta, i, step)) / 3
    return linalg.hermitian_part(d)


def sld_from(rho, drho, cutoff=None):
    """Minimal-norm solution ``L`` of ``rho L + L rho = 2 drho``.

    Entries with ``lambda_j + lambda_k`` below the kernel cutoff are set to
    zero, which picks the representative that vanishes on the kernel block.
    """
    w, U = linalg.herm_eig(rho)
    if cutoff is None:
        cutoff = linalg.default_cutoff(w)
    d = U.conj().T @ drho @ U
    s = w[:, None] + w[None, :]
    mask = s >= cutoff
    Lt = np.zeros_like(d)
    Lt[mask] = 2 * d[mask] / s[mask]
    return linalg.hermitian_part(U @ Lt @ U.conj().T)


def sld(m, theta):
    """SLDs ``(L_1, ..., L_d)`` of the model at ``theta``."""
    rho = state_at(m, theta)
    return [sld_from(rho, derivative(m, theta, i)) for i in range(m.param_dim)]


def fisher_from(rho, L):
    d = len(L)
    J = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            J[i, j] = np.trace(rho @ L[j] @ L[i]).real
    return 0.5 * (J + J.T)


def sld_fisher(m, theta):
    """SLD Fisher information ``J_ij = Re Tr(rho L_j L_i)``."""
    rho = state_at(m, theta)
    return fisher_from(rho, sld(m, theta))


@dataclass
class LebesgueDecomposition:
    R: np.ndarray
    singular: np.ndarray
    residual: float
    clamped: float


def sqrt_likelihood_ratio(rho, sigma, cutoff=None, atol=1e-8):
    """Square-root likelihood ratio of ``sigma`` relative to ``rho``.

    Returns ``(R, sigma_perp)`` with ``sigma = R rho R + sigma_perp``,
    ``R >= 0`` and ``Tr(rho sigma_perp) = 0``. On the support ``P`` of
    ``rho`` the ratio is ``rho^{-1/2} (rho^{1/2} sigma rho^{1/2})^{1/2} rho^{-1/2}``.
    When ``sigma`` has weight across the support/kernel split, the cross
    blocks of ``R`` are completed so that ``R rho R`` is the Schur-complement
    absolutely continuous part and ``sigma_perp`` lives on the kernel.

    Raises
    ------
    ValidationError
        If the reconstruction residual exceeds ``atol``.
    """
    dec = lebesgue_decomposition(rho, sigma, cutoff=cutoff, atol=atol)
    return dec.R, dec.singular


def lebesgue_decomposition(rho, sigma, cutoff=None, atol=1e-8):
    rho = linalg.check_hermitian(np.asarray(rho, dtype=complex), 1e-10, "rho")
    sigma = linalg.check_hermitian(np.asarray(sigma, dtype=complex), 1e-10, "sigma")
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    w, U = np.linalg.eigh(rho)
    if cutoff is None:
        cutoff = linalg.default_cutoff(w)
    sup = w > cutoff
    Us, Uk = U[:, sup], U[:, ~sup]
    ws = w[sup]
    s11 = linalg.hermitian_part(Us.conj().T @ sigma @ Us)
    s21 = Uk.conj().T @ sigma @ Us
    r_half = np.sqrt(ws)
    inner = linalg.hermitian_part(r_half[:, None] * s11 * r_half[None, :])
    mid = linalg.matrix_function(inner, "sqrt", neg_atol=1e-10)
    R11 = linalg.hermitian_part(mid / r_half[:, None] / r_half[None, :])
    dim = len(w)
    Rt = np.zeros((dim, dim), dtype=complex)
    ns = int(sup.sum())
    Rt[:ns, :ns] = R11
    if Uk.shape[1] and np.max(np.abs(s21), initial=0.0) > 1e-14:
        # R21 rho1 R11 = sigma21 fixes the cross block; R22 = R21 R11^{-1} R12 keeps R >= 0.
        R11_inv = np.linalg.pinv(R11, rcond=1e-12, hermitian=True)
        R21 = s21 @ R11_inv / ws[None, :]
        Rt[ns:, :ns] = R21
        Rt[:ns, ns:] = R21.conj().T
        Rt[ns:, ns:] = linalg.hermitian_part(R21 @ R11_inv @ R21.conj().T)
    basis = np.concatenate([Us, Uk], axis=1)
    R = linalg.hermitian_part(basis @ Rt @ basis.conj().T)
    ac = linalg.hermitian_part(R @ rho @ R)
    perp = linalg.hermitian_part(sigma - ac)
    pw, pU = np.linalg.eigh(perp)
    clamped = float(-pw[pw < 0].sum()) if np.any(pw < 0) else 0.0
    if np.any(pw < -atol):
        residual = float(np.max(np.abs(pw[pw < 0])))
        raise ValidationError(
            f"Lebesgue decomposition residual {residual:.3e} exceeds {atol:.1e} "
            "(near-kernel structure is numerically pathological)"
        )
    perp = linalg.hermitian_part((pU * np.clip(pw, 0, None)) @ pU.conj().T)
    residual = float(np.max(np.abs(sigma - ac - perp)))
    if residual > atol:
        raise ValidationError(f"Lebesgue decomposition residual {residual:.3e} exceeds {atol:.1e}")
    return LebesgueDecomposition(R=R, singular=perp, residual=residual, clamped=clamped)


# ---------------------------------------------------------------------------
# built-in families


def _pure_1d():
    def state(t):
        th = t[0]
        sech, tanh = 1 / np.cosh(th), np.tanh(th)
        return 0.5 * np.array([[1 + sech, tanh], [tanh, 1 - sech]], dtype=complex)

    def deriv(t, i):
        th = t[0]
        sech, tanh = 1 / np.cosh(th), np.tanh(th)
        return 0.5 * np.array([[-sech * tanh, sech**2], [sech**2, sech * tanh]], dtype=complex)

    return ParametricModel("pure_1d", 2, 1, state, deriv, None)


def _spin_coherent():
    def radial(t):
        return np.sqrt(1.0 - t[0] ** 2 - t[1] ** 2)

    def state(t):
        return 0.5 * (I2 + t[0] * PAULI[0] + t[1] * PAULI[1] + radial(t) * PAULI[2])

    def deriv(t, i):
        return 0.5 * (PAULI[i] - t[i] / radial(t) * PAULI[2])

    def margin(t):
        return 1.0 - t[0] ** 2 - t[1] ** 2

    return ParametricModel("spin_coherent", 2, 2, state, deriv, margin)


def _bloch_ball():
    def state(t):
        return 0.5 * (I2 + t[0] * PAULI[0] + t[1] * PAULI[1] + t[2] * PAULI[2])

    def deriv(t, i):
        return 0.5 * PAULI[i]

    def margin(t):
        return 1.0 - float(t @ t)

    return ParametricModel("bloch_ball", 2, 3, state, deriv, margin)


def _shifted_bloch(offset):
    offset = np.asarray(offset, dtype=float)

    def state(t):
        v = t + offset
        return 0.5 * (I2 + v[0] * PAULI[0] + v[1] * PAULI[1] + v[2] * PAULI[2])

    def deriv(t, i):
        return 0.5 * PAULI[i]

    def margin(t):
        v = t + offset
        return 1.0 - float(v @ v)

    return state, deriv, margin


def product_non_iid(offset=(0.3, 0.0, 0.0), decay=1.0):
    """Product family ``sigma^(k)_theta = (I + (theta + offset / k**decay) . sigma) / 2``.

    Each site is a shifted Bloch-ball model converging to the Bloch ball as
    ``k -> infinity``; SLDs converge as well, so the product is q-LAN and
    admits a D-extension built from the limiting site.
    """
    offset = np.asarray(offset, dtype=float)
    if offset.shape != (3,):
        raise ValidationError("offset must have three components")

    def site(k):
        if k < 1:
            raise ValidationError("site index starts at 1")
        s, d, mg = _shifted_bloch(offset / float(k) ** decay)
        return ParametricModel(f"product_non_iid[{k}]", 2, 3, s, d, mg)

    return ProductModel(
        "product_non_iid", site, _bloch_ball(), {"offset": offset.tolist(), "decay": decay}
    )


_BUILTINS = {
    "pure_1d": _pure_1d,
    "spin_coherent": _spin_coherent,
    "bloch_ball": _bloch_ball,
    "product_non_iid": product_non_iid,
}

BUILTIN_TAGS = tuple(_BUILTINS)


def builtin(tag, **params):
    """Return a built-in model by tag.

    ``pure_1d``: ``sech(t) e^{t sigma_x / 2} |0><0| e^{t sigma_x / 2}``.
    ``spin_coherent``: ``(I + t1 s1 + t2 s2 + sqrt(1 - t1^2 - t2^2) s3) / 2``.
    ``bloch_ball``: ``(I + t . s) / 2``.
    ``product_non_iid``: see :func:`product_non_iid`.
    """
    try:
        factory = _BUILTINS[tag]
    except KeyError:
        raise ValidationError(f"unknown builtin model {tag!r}; choose from {BUILTIN_TAGS}") from None
    if params and tag != "product_non_iid":
        raise ValidationError(f"builtin {tag!r} takes no parameters")
    return factory(**params)


def affine(rho0, directions, name="affine", atol=STATE_ATOL):
    """Model ``theta -> rho0 + sum_i theta^i B_i``.

    ``rho0`` must be a density matrix and every ``B_i`` Hermitian and
    traceless; the domain is wherever the result stays positive semidefinite.
    """
    rho0 = validate_density(rho0, name="rho0")
    Bs = []
    for i, B in enumerate(directions):
        B = linalg.check_hermitian(np.asarray(B, dtype=complex), atol, f"B_{i + 1}")
        if abs(np.trace(B)) > atol:
            raise ValidationError(f"B_{i + 1} must be traceless")
        if B.shape != rho0.shape:
            raise ValidationError(f"B_{i + 1} shape {B.shape} differs from rho0 {rho0.shape}")
        Bs.append(B)
    Bs = tuple(Bs)

    def state(t):
        out = rho0.copy()
        for ti, B in zip(t, Bs):
            out = out + ti * B
        return out

    def deriv(t, i):
        return Bs[i]

    def margin(t):
        return float(np.linalg.eigvalsh(linalg.hermitian_part(state(t)))[0]) + atol

    return ParametricModel(name, rho0.shape[0], len(Bs), state, deriv, margin,
                           {"rho0": rho0, "B": Bs})


# ---------------------------------------------------------------------------
# model definition files


def decode_matrix(obj):
    """Decode a nested list whose leaves are ``[re, im]`` pairs or plain reals."""
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ValidationError(f"cannot decode matrix of shape {arr.shape}")


def encode_matrix(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def model_from_dict(doc):
    """Build a model from a parsed model-definition document."""
    try:
        kind = doc["kind"]
        dim = int(doc["dim"])
        param_dim = int(doc["param_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"model file missing or bad field: {exc}") from None
    if kind == "builtin":
        params = dict(doc.get("params", {}))
        m = builtin(doc["tag"], **params)
    elif kind == "affine":
        m = affine(decode_matrix(doc["rho0"]), [decode_matrix(B) for B in doc["B"]],
                   name=doc.get("name", "affine"))
    else:
        raise ValidationError(f"unknown model kind {kind!r}")
    if m.hilbert_dim != dim or m.param_dim != param_dim:
        raise ValidationError(
            f"model file declares dim={dim}, param_dim={param_dim} but model has "
            f"dim={m.hilbert_dim}, param_dim={m.param_dim}"
        )
    return m


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc)


def resolve_model(spec: str):
    """Builtin tag or path to a model-definition JSON file."""
    if spec in _BUILTINS:
        return builtin(spec)
    if not os.path.isfile(spec):
        raise ValidationError(f"{spec!r} is neither a builtin model ({', '.join(BUILTIN_TAGS)}) nor a file")
    return load_model(spec)


def site_states(m, theta, n: int) -> Sequence[np.ndarray]:
    """Per-site states for ``n`` sites (identical for an i.i.d. model)."""
    if isinstance(m, ProductModel):
        return [state_at(m.site(k), theta) for k in range(1, n + 1)]
    return [state_at(m, theta)] * n
