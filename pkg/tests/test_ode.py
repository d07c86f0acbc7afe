import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from embedded_spectra import _backend
from embedded_spectra.errors import IntegrationError, NonFiniteCoefficient, RankCollapse
from embedded_spectra.ode import (CoefficientField, IntegratorConfig, evolve_subspace,
                                  fundamental_matrix, integrate_matrix_ode,
                                  integrate_vector_ode, principal_angles, schrodinger_field,
                                  subspace_trajectory)


def test_constant_field_matches_cosh_sinh(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = CoefficientField.constant([[0.0, 1.0], [1.0, 0.0]])
    Y = integrate_matrix_ode(fld, 0.0, 2.0, np.eye(2), cfg)
    c, s = np.cosh(2.0), np.sinh(2.0)
    assert np.allclose(Y, [[c, s], [s, c]], rtol=1e-9, atol=0)


def test_harmonic_oscillator_quarter_period(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = CoefficientField.constant([[0.0, 1.0], [-1.0, 0.0]])
    v = integrate_vector_ode(fld, 0.0, np.pi / 2, [0.0, 1.0], cfg)
    assert np.allclose(v, [1.0, 0.0], atol=1e-10)


def test_backward_integration_inverts_forward(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = schrodinger_field(lambda x: (2 * np.cos(2 * x))[:, None, None], 1, 0.3)
    F = integrate_matrix_ode(fld, 0.0, 2.5, np.eye(2), cfg)
    B = integrate_matrix_ode(fld, 2.5, 0.0, np.eye(2), cfg)
    assert np.allclose(F @ B, np.eye(2), atol=1e-9)


def test_dense_output_matches_pointwise(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = CoefficientField.constant([[0.0, 1.0], [-4.0, 0.0]])
    xs = np.linspace(0, 3, 31)
    phis = fundamental_matrix(fld, xs, cfg)
    exact = np.array([[[np.cos(2 * x), np.sin(2 * x) / 2], [-2 * np.sin(2 * x), np.cos(2 * x)]]
                      for x in xs])
    assert np.max(np.abs(phis - exact)) < 1e-9


@pytest.mark.skipif("cython" not in _backend.KERNELS, reason="compiled kernel not built")
def test_kernels_agree():
    fld = schrodinger_field(lambda x: (1 - 2 / np.cosh(x) ** 2)[:, None, None], 1, -0.4)
    a = integrate_matrix_ode(fld, -5, 5, np.eye(2), IntegratorConfig(kernel="cython"))
    b = integrate_matrix_ode(fld, -5, 5, np.eye(2), IntegratorConfig(kernel="python"))
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(a))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4), st.floats(0.2, 2.0))
def test_liouville_formula(entries, length):
    C = np.array(entries).reshape(2, 2)
    fld = CoefficientField(func=None, dim=2,
                           batch=lambda xs: C + np.sin(xs)[:, None, None] * np.eye(2))
    Y = integrate_matrix_ode(fld, 0.0, length, np.eye(2))
    expected = np.exp(np.trace(C) * length + 2 * (1 - np.cos(length)))
    assert abs(np.linalg.det(Y) - expected) < 1e-8 * expected


def test_non_finite_coefficient():
    fld = CoefficientField(func=None, dim=1,
                           batch=lambda xs: np.where(xs > 0.5, np.nan, 1.0)[:, None, None])
    with pytest.raises(NonFiniteCoefficient):
        integrate_matrix_ode(fld, 0.0, 1.0, np.eye(1))


def test_grid_must_be_monotone():
    fld = CoefficientField.constant([[0.0]])
    with pytest.raises(ValueError):
        fundamental_matrix(fld, [0.0, 1.0, 0.5])


def test_domain_is_enforced():
    fld = CoefficientField(func=None, dim=1, batch=lambda xs: np.zeros((len(xs), 1, 1)),
                           domain=(0.0, 1.0))
    with pytest.raises(IntegrationError):
        integrate_matrix_ode(fld, 0.0, 2.0, np.eye(1))


@pytest.mark.parametrize("bad", [{"rel_tol": 0.0}, {"abs_tol": -1.0}, {"max_step": 0.0},
                                 {"renorm_interval": -2.0}])
def test_config_rejects_non_positive(bad):
    with pytest.raises(ValueError):
        IntegratorConfig(**bad)


def test_evolve_subspace_spans_flow_image(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = schrodinger_field(lambda x: np.stack([np.diag([1.0 + np.cos(t), 2.0]) for t in x]),
                            2, 0.5)
    basis = np.linalg.qr(np.random.default_rng(3).normal(size=(4, 2)))[0]
    Q = evolve_subspace(fld, basis, 0.0, 3.7, cfg)
    direct = integrate_matrix_ode(fld, 0.0, 3.7, basis, cfg)
    assert np.allclose(Q.T @ Q, np.eye(2), atol=1e-12)
    assert np.max(principal_angles(Q, direct)) < 1e-9


def test_rank_collapse_detected():
    fld = CoefficientField.constant(np.diag([60.0, 0.0]))
    basis = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    with pytest.raises(RankCollapse):
        evolve_subspace(fld, basis, 0.0, 1.0, IntegratorConfig(renorm_interval=1.0))


def test_basis_must_be_orthonormal():
    fld = CoefficientField.constant(np.eye(2))
    with pytest.raises(ValueError):
        evolve_subspace(fld, np.array([[1.0], [1.0]]), 0.0, 1.0)


def test_trajectory_reconstructs_solution(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    fld = CoefficientField.constant([[0.0, 1.0], [2.0, 0.0]])
    basis = np.array([[1.0], [0.0]])
    xs = np.linspace(0.0, 6.0, 61)
    traj = subspace_trajectory(fld, basis, 0.0, 6.0, xs, cfg)
    direct = fundamental_matrix(fld, xs, cfg)[:, :, 0]
    coeff = np.linalg.lstsq(traj.final, direct[-1], rcond=None)[0]
    sol = traj.solution(coeff)
    order = np.argsort(traj.xs)
    assert np.allclose(traj.xs[order], xs)
    assert np.max(np.abs(sol[order] - direct)) < 1e-8 * np.max(np.abs(direct))


def test_principal_angles_small_angle_accuracy():
    t = 1e-9
    A = np.array([[1.0], [0.0]])
    B = np.array([[np.cos(t)], [np.sin(t)]])
    assert abs(principal_angles(A, B)[0] - t) < 1e-20
