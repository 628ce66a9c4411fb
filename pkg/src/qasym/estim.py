"""Risk curves for the Hodges, James-Stein and regular estimators.

Hodges risk is a deterministic 2-d quadrature over the idealized Gaussian
outcome law of the spin-coherent model. James-Stein risk is Monte Carlo with
a Philox counter-based generator; samples are split into fixed-size shards,
shard ``k`` is seeded from ``SeedSequence(seed, spawn_key=(k,))`` and shard
statistics are merged in index order, so results do not depend on how many
workers ran.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.special

from . import bound
from .errors import ValidationError

RNG_ALGORITHM = "numpy.random.Philox"
SHARD_SIZE = 1 << 16
TAIL_SIGMAS = 7.5  # Gaussian mass beyond this Mahalanobis radius is < 1e-12


@dataclass
class RiskCurve:
    abscissa: list
    risk: list
    stderr: Optional[list] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = [float(a) for a in self.abscissa]
        self.risk = [float(v) for v in self.risk]
        if len(self.abscissa) != len(self.risk):
            raise ValidationError("abscissa and risk lengths differ")
        if self.stderr is not None:
            self.stderr = [float(s) for s in self.stderr]
            if len(self.stderr) != len(self.risk):
                raise ValidationError("stderr and risk lengths differ")
        if not all(np.isfinite(v) and v >= 0 for v in self.risk):
            raise ValidationError("risk values must be finite and non-negative")

    def columns(self):
        cols = {"abscissa": self.abscissa, "risk": self.risk}
        if self.stderr is not None:
            cols["stderr"] = self.stderr
        return cols


# ---------------------------------------------------------------- Hodges

def _panels(a, b, width):
    if b <= a:
        return []
    k = max(1, int(np.ceil((b - a) / width)))
    edges = np.linspace(a, b, k + 1)
    return list(zip(edges[:-1], edges[1:]))


def _gl(a, b, x, w):
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def hodges_point(theta1, n, radial_order=64, angular_order=32, truncate=True):
    """Weighted risk ``n E[w]`` of the truncated estimator at ``(theta1, 0)``.

    ``w = (r cos phi - theta1)^2 / (1 - theta1^2) + r^2 sin^2 phi`` and the
    outcome density in polar coordinates is
    ``n / (4 pi sqrt(1 - theta1^2)) exp(-n w / 4)``. Inside the disc of radius
    ``n^{-1/4}`` the estimate is the origin, so ``w`` is replaced by ``w(0)``.
    """
    t = float(theta1)
    if not abs(t) < 1:
        raise ValidationError(f"theta1 = {t} outside (-1, 1)")
    if n < 1:
        raise ValidationError("n must be >= 1")
    c2 = 1.0 - t * t
    norm = n / (4 * np.pi * np.sqrt(c2))
    w0 = t * t / c2
    rho_n = n ** -0.25 if truncate else 0.0
    delta = TAIL_SIGMAS * np.sqrt(2.0 / n)
    r_lo, r_hi = max(0.0, abs(t) - delta), abs(t) + delta
    if delta < abs(t):
        centre = 0.0 if t > 0 else np.pi
        half = np.arcsin(delta / abs(t))
        phi_lo, phi_hi = centre - half, centre + half
    else:
        phi_lo, phi_hi = 0.0, 2 * np.pi
    xr, wr = np.polynomial.legendre.leggauss(radial_order)
    xa, wa = np.polynomial.legendre.leggauss(angular_order)
    step = delta / 4
    ang = _panels(phi_lo, phi_hi, step / r_hi)
    cuts = sorted({r_lo, r_hi, *([rho_n] if r_lo < rho_n < r_hi else [])})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        inside = b <= rho_n
        for ra, rb in _panels(a, b, step):
            r, rw = _gl(ra, rb, xr, wr)
            for pa, pb in ang:
                p, pw = _gl(pa, pb, xa, wa)
                R, P = np.meshgrid(r, p, indexing="ij")
                w = (R * np.cos(P) - t) ** 2 / c2 + (R * np.sin(P)) ** 2
                q = norm * np.exp(-n * w / 4) * R
                loss = w0 if inside else w
                total += float(rw @ (loss * q) @ pw)
    return n * total


def hodges_risk(theta1_grid, n, radial_order=64, angular_order=32, truncate=True):
    grid = [float(t) for t in theta1_grid]
    bad = [t for t in grid if not abs(t) < 1]
    if bad:
        raise ValidationError(f"grid points outside (-1, 1): {bad}")
    risk = [hodges_point(t, n, radial_order, angular_order, truncate) for t in grid]
    meta = {"n": int(n), "radial_order": radial_order, "angular_order": angular_order,
            "truncate": bool(truncate), "truncation_radius": n ** -0.25 if truncate else 0.0}
    return RiskCurve(grid, risk, None, meta)


# ---------------------------------------------------------------- James-Stein

def shard_generator(seed, shard):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(shard),))
    return np.random.Generator(np.random.Philox(ss))


SHRINKAGE = ("norm", "norm-squared")


def _js_shard(h, count, seed, shard, shrinkage="norm"):
    rng = shard_generator(seed, shard)
    x = h + rng.standard_normal((count, 3))
    nrm = np.linalg.norm(x, axis=1)
    bad = nrm < 1e-12
    while np.any(bad):
        k = int(bad.sum())
        x[bad] = h + rng.standard_normal((k, 3))
        nrm[bad] = np.linalg.norm(x[bad], axis=1)
        bad = nrm < 1e-12
    scale = 1.0 / nrm if shrinkage == "norm" else 1.0 / nrm**2
    y = (1.0 - scale)[:, None] * x
    loss = np.sum((y - h) ** 2, axis=1)
    mean = float(loss.mean())
    return count, mean, float(np.sum((loss - mean) ** 2))


def james_stein_risk(h, samples, seed, workers=1, shrinkage="norm"):
    """Monte Carlo ``E|y - h|^2`` for ``y = (1 - 1/|x|) x``, ``x ~ N(h, I_3)``.

    ``shrinkage="norm-squared"`` uses ``y = (1 - 1/|x|^2) x`` instead, whose
    risk ``3 - E|x|^{-2}`` stays below 3 for every ``h``; the default map has
    risk ``4 - 4 E|x|^{-1}``, which exceeds 3 once ``|h|`` is above about 4.

    Returns ``{"risk", "stderr", "samples", "shards"}``.
    """
    if shrinkage not in SHRINKAGE:
        raise ValidationError(f"shrinkage must be one of {SHRINKAGE}")
    h = np.asarray(h, dtype=float).ravel()
    if h.shape != (3,):
        raise ValidationError("h must have 3 components")
    samples = int(samples)
    if samples < 10_000:
        raise ValidationError("samples must be >= 10^4")
    counts = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        counts.append(samples % SHARD_SIZE)
    jobs = [(h, c, seed, k, shrinkage) for k, c in enumerate(counts)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda j: _js_shard(*j), jobs))
    else:
        parts = [_js_shard(*j) for j in jobs]
    # pairwise merge of (count, mean, M2), in shard order
    n_tot, mean, m2 = 0, 0.0, 0.0
    for c, mu, s2 in parts:
        tot = n_tot + c
        d = mu - mean
        mean += d * c / tot
        m2 += s2 + d * d * n_tot * c / tot
        n_tot = tot
    var = m2 / (n_tot - 1)
    return {"risk": mean, "stderr": float(np.sqrt(var / n_tot)), "samples": n_tot,
            "shards": len(counts)}


def james_stein_curve(norms, samples, seed, direction=(1.0, 0.0, 0.0), workers=1, shrinkage="norm"):
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    risk, err = [], []
    for k, a in enumerate(norms):
        out = james_stein_risk(float(a) * u, samples, seed + k, workers, shrinkage)
        risk.append(out["risk"])
        err.append(out["stderr"])
    meta = {"samples": int(samples), "seed": int(seed), "seeds": [seed + k for k in range(len(norms))],
            "rng": RNG_ALGORITHM, "direction": u.tolist(), "shrinkage": shrinkage}
    return RiskCurve(list(norms), risk, err, meta)


def james_stein_exact(a, shrinkage="norm"):
    """Closed-form risk at ``|h| = a`` from Stein's identity.

    ``E|x|^{-1} = erf(a / sqrt 2) / a`` and ``E|x|^{-2} = sqrt(2) D(a / sqrt 2) / a``
    (``D`` the Dawson function) for ``x ~ N(h, I_3)``; at ``a = 0`` they are
    ``sqrt(2/pi)`` and 1.
    """
    a = float(a)
    if shrinkage == "norm":
        inv = np.sqrt(2 / np.pi) if a == 0 else scipy.special.erf(a / np.sqrt(2)) / a
        return 4.0 - 4.0 * inv
    inv2 = 1.0 if a == 0 else np.sqrt(2) * scipy.special.dawsn(a / np.sqrt(2)) / a
    return 3.0 - inv2


# ---------------------------------------------------------------- regular / minimax

def regular_risk(res, G, h_grid):
    """Constant curve ``Tr(G V_star)`` over ``h_grid``."""
    V = bound.optimal_covariance(res, G)
    value = float(np.trace(np.asarray(G, dtype=float) @ V))
    grid = [float(np.linalg.norm(np.atleast_1d(h))) if np.ndim(h) else float(h) for h in h_grid]
    return RiskCurve(grid, [value] * len(grid), None, {"bound": res.value})


def minimax_scan(curve, H):
    """``max`` of the curve's risk over the index subset ``H``."""
    H = list(H)
    if not H:
        raise ValidationError("H must be non-empty")
    for i in H:
        if not 0 <= int(i) < len(curve.risk):
            raise ValidationError(f"index {i} outside the curve")
    return float(max(curve.risk[int(i)] for i in H))


def _langevin(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-4
    out[small] = x[small] / 3 - x[small] ** 3 / 45
    xs = x[~small]
    out[~small] = 1.0 / np.tanh(xs) - 1.0 / xs
    return out


def truncated_gaussian_risk(norms, radius=1.0, order=200):
    """Risk ``E|T - h|^2`` of ``T = x 1{|x| >= radius}``, ``x ~ N(h, I_3)``.

    With ``s = |x|`` (noncentral chi, 3 degrees of freedom) and ``a = |h|``,
    ``risk = 3 - int_0^radius (s^2 - 2 s a L(s a)) f_a(s) ds`` where ``L`` is
    the Langevin function ``E[cos angle(x, h) | s]``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    s, sw = _gl(0.0, float(radius), x, w)
    risk = []
    for a in norms:
        a = float(a)
        if a < 1e-12:
            f = np.sqrt(2 / np.pi) * s * s * np.exp(-s * s / 2)
            drift = np.zeros_like(s)
        else:
            f = (s / a) * (np.exp(-(s - a) ** 2 / 2) - np.exp(-(s + a) ** 2 / 2)) / np.sqrt(2 * np.pi)
            drift = 2 * s * a * _langevin(s * a)
        risk.append(3.0 - float(sw @ ((s * s - drift) * f)))
    return RiskCurve(list(norms), risk, None, {"radius": float(radius), "order": order})
