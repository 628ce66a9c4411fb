import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import superoperator_commutation, traceless_hermitian
from qasym import dext, linalg, model
from qasym.errors import ValidationError

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(2, 4), st.booleans())
def test_commutation_matches_superoperator_inverse(seed, dim, deficient):
    rng = np.random.default_rng(seed)
    rho = linalg.random_density(dim, rng, rank=dim - 1 if deficient else dim)
    Xm = linalg.random_hermitian(dim, rng)
    Y = dext.commutation_apply(rho, Xm)
    assert np.max(np.abs(Y - superoperator_commutation(rho, Xm))) <= 1e-10
    # defining relation
    assert np.allclose(rho @ Y + Y @ rho, 1j * (rho @ Xm - Xm @ rho), atol=1e-10)


def test_commutation_on_maximally_mixed_is_zero():
    Xm = model.PAULI[0]
    assert np.allclose(dext.commutation_apply(np.eye(2) / 2, Xm), 0)


def test_commutation_on_bloch_state():
    # rho = (I + a sigma_z)/2 rotates sigma_x into a multiple of sigma_y
    a = 0.6
    rho = 0.5 * (np.eye(2) + a * model.PAULI[2])
    Y = dext.commutation_apply(rho, model.PAULI[0])
    assert np.allclose(Y, -a * model.PAULI[1])


def test_spin_coherent_sld_span_is_invariant():
    m = model.builtin("spin_coherent")
    for theta in ([0.0, 0.0], [0.2, 0.1], [0.5, 0.0]):
        rho = model.state_at(m, theta)
        rep = dext.check_d_invariance(rho, model.sld(m, theta))
        assert rep.invariant


def test_bloch_ball_off_axis_needs_no_extension():
    m = model.builtin("bloch_ball")
    theta = [0.3, 0.0, 0.0]
    ext = dext.build_d_extension(model.state_at(m, theta), model.sld(m, theta))
    assert ext.r == 3


def test_one_parameter_qutrit_gets_extended(rng):
    rho = linalg.random_density(3, rng)
    L = [model.sld_from(rho, traceless_hermitian(3, rng))]
    rep = dext.check_d_invariance(rho, [L[0] - np.trace(rho @ L[0]).real * np.eye(3)])
    assert not rep.invariant
    ext = dext.build_d_extension(rho, L)
    assert ext.r > 1
    ext.validate()
    assert dext.check_d_invariance(rho, ext.X).invariant
    assert np.allclose(ext.tau, ext.Sigma @ ext.F)
    # the SLD is the first element, recentred
    assert np.allclose(ext.X[0], L[0] - np.trace(rho @ L[0]).real * np.eye(3))


@given(seeds, st.integers(2, 4), st.integers(1, 3))
def test_cross_matrix_dominated_by_geometric_mean(seed, dim, k):
    rng = np.random.default_rng(seed)
    rho = linalg.random_density(dim, rng)
    Xs = []
    for _ in range(k):
        A = linalg.random_hermitian(dim, rng)
        Xs.append(A - np.trace(rho @ A).real * np.eye(dim))
    Sigma = dext.covariance(rho, Xs)
    A = dext.cross_matrix(rho, Xs)
    gap = np.linalg.eigvalsh(A - linalg.conjugate_pair_mean(Sigma))
    assert gap[-1] <= 1e-8


def test_equality_exactly_on_invariant_spans(rng):
    for _ in range(20):
        dim = int(rng.integers(2, 4))
        rho = linalg.random_density(dim, rng)
        L = [model.sld_from(rho, traceless_hermitian(dim, rng))]
        ext = dext.build_d_extension(rho, L)
        assert dext.check_d_invariance(rho, ext.X).geometric_mean_gap <= 1e-8
        rep = dext.check_d_invariance(rho, ext.X[:1])
        assert not rep.invariant and rep.geometric_mean_gap > 1e-8


def test_rotated_and_full_extensions_stay_invariant(rng):
    rho = linalg.random_density(3, rng)
    L = [model.sld_from(rho, traceless_hermitian(3, rng)) for _ in range(2)]
    ext = dext.build_d_extension(rho, L)
    rot = dext.rotate_extension(ext, rng)
    full = dext.full_extension(rho, L)
    for e in (rot, full):
        e.validate()
        assert dext.check_d_invariance(rho, e.X).invariant
    assert full.r == 8
    assert not np.allclose(rot.Sigma, ext.Sigma)


def test_dependent_observables_rejected():
    rho = np.eye(2) / 2
    with pytest.raises(ValidationError):
        dext.check_d_invariance(rho, [model.PAULI[0], 2 * model.PAULI[0]])


def test_sandwich_gap_small_for_iid_qubit():
    rho = np.eye(2) / 2
    Xs = list(model.PAULI)
    Sigma = dext.covariance(rho, Xs)
    grid = [(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])), (np.zeros(3), np.zeros(3))]
    assert dext.max_sandwich_gap(rho, Xs, Sigma, grid, 10**6) < 1e-6
