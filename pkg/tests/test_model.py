import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from helpers import random_psd, traceless_hermitian
from qasym import linalg, model
from qasym.errors import ValidationError

seeds = st.integers(0, 2**32 - 1)
X, Y, Z = model.PAULI


def test_states_are_valid():
    for tag, theta in [("pure_1d", [0.7]), ("spin_coherent", [0.2, 0.1]), ("bloch_ball", [0.1, 0.2, 0.3])]:
        rho = model.state_at(model.builtin(tag), theta)
        assert np.isclose(np.trace(rho).real, 1)
        assert linalg.is_psd(rho)


def test_domain_rejection():
    with pytest.raises(ValidationError):
        model.state_at(model.builtin("bloch_ball"), [1.0, 0, 0])
    with pytest.raises(ValidationError):
        model.state_at(model.builtin("spin_coherent"), [0.1])
    with pytest.raises(ValidationError):
        model.builtin("unknown")


@pytest.mark.parametrize("tag,theta", [("pure_1d", [0.3]), ("spin_coherent", [0.2, -0.4]),
                                       ("bloch_ball", [0.1, -0.2, 0.3])])
def test_analytic_derivative_matches_difference_quotient(tag, theta):
    m = model.builtin(tag)
    stripped = model.ParametricModel(m.name, m.hilbert_dim, m.param_dim, m.state_fn, None, m.margin_fn)
    for i in range(m.param_dim):
        a = model.derivative(m, theta, i)
        b = model.derivative(stripped, theta, i)
        assert np.max(np.abs(a - b)) < 1e-9


@given(seeds, st.integers(2, 4))
def test_sld_solves_lyapunov_equation(seed, dim):
    rng = np.random.default_rng(seed)
    rho = linalg.random_density(dim, rng)
    drho = traceless_hermitian(dim, rng)
    L = model.sld_from(rho, drho)
    assert np.allclose(rho @ L + L @ rho, 2 * drho, atol=1e-8)
    oracle = scipy.linalg.solve_sylvester(rho, rho, 2 * drho)
    assert np.allclose(L, oracle, atol=1e-6 * max(1, np.abs(oracle).max()))


def test_pure_1d_sld_at_origin_is_sigma_x():
    L = model.sld(model.builtin("pure_1d"), [0.0])[0]
    assert np.allclose(L, X, atol=1e-12)


@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-0.5, 0.5))
def test_bloch_ball_fisher_closed_form(a, b, c):
    t = np.array([a, b, c])
    if t @ t >= 0.9:
        return
    J = model.sld_fisher(model.builtin("bloch_ball"), t)
    oracle = np.eye(3) + np.outer(t, t) / (1 - t @ t)
    assert np.allclose(J, oracle, atol=1e-9)


@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))
def test_spin_coherent_fisher_pure_state_formula(a, b):
    t = np.array([a, b])
    if t @ t >= 0.95:
        return
    m = model.builtin("spin_coherent")
    d = [model.derivative(m, t, i) for i in range(2)]
    # for a pure state L = 2 d rho, so J_ij = 4 Re Tr rho d_i d_j ... = 2 Tr d_i d_j
    oracle = np.array([[2 * np.trace(d[i] @ d[j]).real for j in range(2)] for i in range(2)])
    assert np.allclose(model.sld_fisher(m, t), oracle, atol=1e-9)


def test_spin_coherent_fisher_on_axis():
    J = model.sld_fisher(model.builtin("spin_coherent"), [0.4, 0.0])
    assert np.allclose(J, np.diag([1 / 0.84, 1.0]), atol=1e-10)


@given(seeds, st.integers(2, 4), st.booleans())
def test_sqrt_likelihood_ratio_reconstruction(seed, dim, deficient):
    rng = np.random.default_rng(seed)
    rank = max(1, dim - 1) if deficient else dim
    rho = linalg.random_density(dim, rng, rank=rank)
    sigma = linalg.random_density(dim, rng)
    R, perp = model.sqrt_likelihood_ratio(rho, sigma)
    assert linalg.is_psd(R, atol=1e-9)
    assert linalg.is_psd(perp, atol=1e-9)
    assert np.max(np.abs(R @ rho @ R + perp - sigma)) <= 1e-8
    assert abs(np.trace(rho @ perp)) <= 1e-8


def test_sqrt_likelihood_ratio_faithful_commuting_case():
    rho = np.diag([0.6, 0.4])
    sigma = np.diag([0.3, 0.7])
    R, perp = model.sqrt_likelihood_ratio(rho, sigma)
    assert np.allclose(R, np.diag(np.sqrt([0.5, 1.75])))
    assert np.allclose(perp, 0)


def test_sqrt_likelihood_ratio_orthogonal_states():
    rho = np.diag([1.0, 0.0])
    sigma = np.diag([0.0, 1.0])
    R, perp = model.sqrt_likelihood_ratio(rho, sigma)
    assert np.allclose(R @ rho @ R, 0)
    assert np.allclose(perp, sigma)


def test_pure_state_pair():
    m = model.builtin("pure_1d")
    rho = model.state_at(m, [0.0])
    sigma = model.state_at(m, [0.4])
    R, perp = model.sqrt_likelihood_ratio(rho, sigma)
    assert np.max(np.abs(R @ rho @ R + perp - sigma)) < 1e-12
    # Schur complement of a pure sigma with nonzero overlap vanishes
    assert np.allclose(perp, 0, atol=1e-12)


def test_singular_part_is_schur_complement(rng):
    rho = np.diag([0.7, 0.3, 0.0]).astype(complex)
    sigma = linalg.random_density(3, rng)
    R, perp = model.sqrt_likelihood_ratio(rho, sigma)
    s11, s21, s22 = sigma[:2, :2], sigma[2:, :2], sigma[2:, 2:]
    schur = s22 - s21 @ np.linalg.inv(s11) @ s21.conj().T
    expected = np.zeros((3, 3), dtype=complex)
    expected[2:, 2:] = schur
    assert np.allclose(perp, expected, atol=1e-10)


def test_affine_model_and_file_roundtrip(tmp_path):
    rho0 = np.diag([0.5, 0.3, 0.2]).astype(complex)
    B1 = np.zeros((3, 3), dtype=complex)
    B1[0, 1], B1[1, 0] = 0.1j, -0.1j
    B2 = np.diag([0.1, -0.1, 0.0]).astype(complex)
    m = model.affine(rho0, [B1, B2])
    assert np.allclose(model.derivative(m, [0.2, 0.1], 0), B1)
    doc = {"kind": "affine", "dim": 3, "param_dim": 2,
           "rho0": model.encode_matrix(rho0), "B": [model.encode_matrix(B1), model.encode_matrix(B2)]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    m2 = model.resolve_model(str(path))
    assert np.allclose(model.state_at(m2, [0.3, -0.2]), model.state_at(m, [0.3, -0.2]))
    with pytest.raises(ValidationError):
        model.state_at(m2, [0.0, 5.0])
    doc["dim"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        model.resolve_model(str(path))


def test_builtin_model_file(tmp_path):
    path = tmp_path / "b.json"
    path.write_text(json.dumps({"kind": "builtin", "tag": "bloch_ball", "dim": 2, "param_dim": 3}))
    assert model.resolve_model(str(path)).name == "bloch_ball"
    with pytest.raises(ValidationError):
        model.resolve_model(str(tmp_path / "missing.json"))


def test_affine_rejects_trace_and_hermiticity():
    rho0 = np.eye(2) / 2
    with pytest.raises(ValidationError):
        model.affine(rho0, [np.eye(2)])
    with pytest.raises(ValidationError):
        model.affine(rho0, [np.array([[0, 1], [0, 0]])])


def test_product_model_sites_converge():
    pm = model.builtin("product_non_iid")
    states = model.site_states(pm, [0.0, 0.0, 0.0], 200)
    limit = model.state_at(pm.limit, [0.0, 0.0, 0.0])
    assert np.max(np.abs(states[0] - limit)) > 0.1
    assert np.max(np.abs(states[-1] - limit)) < 1e-3


def test_validate_density_errors(rng):
    P = random_psd(2, rng)
    with pytest.raises(ValidationError):
        model.validate_density(P * 3 / np.trace(P).real)
    with pytest.raises(ValidationError):
        model.validate_density(np.diag([1.5, -0.5]))
