import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_covariance, random_real_pd, traceless_hermitian
from qasym import bound, dext, linalg, model
from qasym.errors import ConvergenceError, ValidationError

seeds = st.integers(0, 2**32 - 1)


def _instance(rng, r, d):
    Sigma = random_covariance(r, rng)
    F = rng.normal(size=(r, d))
    return Sigma, Sigma @ F, random_real_pd(d, rng)


@settings(max_examples=15)
@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_barrier_matches_direct_search(seed, r, d):
    if d > r:
        return
    rng = np.random.default_rng(seed)
    Sigma, tau, G = _instance(rng, r, d)
    res = bound.rep_bound(Sigma, tau, G)
    value, _ = bound.direct_search(Sigma, tau, G)
    assert abs(res.value - value) <= 1e-5 * max(1.0, abs(value))
    # roundoff in K^T Re(tau) grows with |K| |Re tau|
    scale = np.linalg.norm(res.K_star, 2) * np.linalg.norm(tau.real, 2)
    assert res.diagnostics["constraint_residual"] < 1e-11 * max(1.0, scale)


@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_real_covariance_closed_form(seed, r, d):
    if d > r:
        return
    rng = np.random.default_rng(seed)
    Sigma = random_real_pd(r, rng)
    F = rng.normal(size=(r, d))
    G = random_real_pd(d, rng)
    expected = np.trace(G @ np.linalg.inv(F.T @ Sigma @ F))
    res = bound.rep_bound(Sigma, Sigma @ F, G)
    assert abs(res.value - expected) <= 1e-7 * max(1.0, expected)


@given(seeds, st.floats(0.1, 10.0))
def test_weight_scaling_and_certified_covariance(seed, c):
    rng = np.random.default_rng(seed)
    Sigma, tau, G = _instance(rng, 3, 2)
    a = bound.rep_bound(Sigma, tau, G)
    b = bound.rep_bound(Sigma, tau, c * G)
    assert abs(b.value - c * a.value) <= 1e-7 * max(1.0, c * a.value)
    V = bound.optimal_covariance(a, G)
    assert abs(np.trace(G @ V) - a.value) <= 1e-8 * max(1.0, a.value)
    assert np.linalg.eigvalsh(V - a.Z_star.real)[0] >= -1e-10


def test_holevo_between_sld_bound_and_twice_it(rng):
    for _ in range(5):
        rho = linalg.random_density(3, rng)
        L = [model.sld_from(rho, traceless_hermitian(3, rng)) for _ in range(2)]
        J = model.fisher_from(rho, L)
        G = random_real_pd(2, rng)
        ext = dext.build_d_extension(rho, L)
        value = bound.rep_bound(ext.Sigma, ext.tau, G).value
        sld_bound = np.trace(G @ np.linalg.inv(J))
        assert sld_bound - 1e-8 <= value <= 2 * sld_bound + 1e-8


@pytest.mark.parametrize("theta", [(0.0, 0.0), (0.2, 0.1), (0.5, 0.0), (-0.6, 0.3)])
def test_spin_coherent_anchor(theta):
    m = model.builtin("spin_coherent")
    G = model.sld_fisher(m, theta)
    res = bound.holevo_bound_iid(m, theta, G)
    assert abs(res.value - 4.0) < 1e-6


def test_bloch_ball_anchor():
    res = bound.holevo_bound_iid(model.builtin("bloch_ball"), [0, 0, 0], np.eye(3))
    assert abs(res.value - 3.0) < 1e-8


def test_bloch_ball_off_centre_has_unique_feasible_point():
    # r = d: K = (Re Sigma)^{-1} is forced, so the bound is explicit
    m = model.builtin("bloch_ball")
    theta = [0.2, -0.3, 0.1]
    rho = model.state_at(m, theta)
    Sigma = dext.covariance(rho, model.sld(m, theta))
    Vi = np.linalg.inv(Sigma.real)
    G = np.diag([1.0, 2.0, 0.5])
    g = np.sqrt(G)
    expected = np.trace(G @ Vi) + linalg.trace_norm(g @ Vi @ Sigma.imag @ Vi @ g)
    res = bound.holevo_bound_iid(m, theta, G)
    assert abs(res.value - expected) < 1e-9
    assert res.value > np.trace(G @ Vi) + 0.1


def test_bad_inputs():
    with pytest.raises(ValidationError):
        bound.rep_bound(np.eye(2), np.eye(2), -np.eye(2))
    with pytest.raises(ValidationError):
        bound.rep_bound(np.eye(2), np.zeros((2, 1)), np.eye(1))
    with pytest.raises(ValidationError):
        bound.rep_bound(np.eye(2), np.ones((2, 3)), np.eye(3))


def test_outer_cap_raises_convergence_error():
    opts = bound.BarrierOptions(max_outer=2)
    Sigma = np.eye(3) + 1j * np.array([[0, 0.5, 0], [-0.5, 0, 0], [0, 0, 0]])
    with pytest.raises(ConvergenceError):
        bound.rep_bound(Sigma, Sigma[:, :1], np.eye(1), opts)


def test_runtime_is_small():
    m = model.builtin("spin_coherent")
    t0 = time.perf_counter()
    bound.holevo_bound_iid(m, [0.2, 0.1], model.sld_fisher(m, [0.2, 0.1]))
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.parametrize("c", [0.1, 5.0, 100.0])
def test_large_weights_reach_the_optimum(c):
    # the barrier once stalled off-centre when Tr(G V) was large
    rng = np.random.default_rng(60196)
    Sigma, tau, G = _instance(rng, 3, 2)
    ref, _ = bound.direct_search(Sigma, tau, G)
    res = bound.rep_bound(Sigma, tau, c * G)
    assert abs(res.value - c * ref) <= 1e-8 * c * ref
