import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

import oracle_values as ov
from embedded_spectra.errors import ConfigError
from embedded_spectra.potentials import (Perturbation, make_example5, make_perturbation,
                                         profile, table_potential, validate_perturbation,
                                         xbeta_norm)


def scalar_field(f):
    return lambda xs: np.asarray(f(np.asarray(xs, dtype=float)))[:, None, None]


def test_norm_of_zero():
    assert xbeta_norm(scalar_field(lambda x: 0 * x), 2.0).value == 0.0


@pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
def test_weight_cancellation(beta):
    nrm = xbeta_norm(scalar_field(lambda x: (1 + np.abs(x)) ** -beta), beta)
    assert abs(nrm.value - 1.0) < 1e-9


def test_example_difference_norm(ex5):
    nrm = ex5.potential.asymptotic_norm()
    assert abs(nrm.value - ov.XBETA_EXAMPLE) < 1e-9
    assert nrm.window_defect < 1e-10


def test_bump_norm_equals_support_max():
    B = make_perturbation("offdiag_row1", {(0, 1): profile("bump", a=1.0, b=2.0)})
    assert abs(B.norm().value - ov.XBETA_BUMP) < 1e-9


def test_beta_must_exceed_one():
    with pytest.raises(ValueError):
        xbeta_norm(scalar_field(np.exp), 1.0)


def test_non_finite_samples():
    with pytest.raises(ValueError):
        xbeta_norm(scalar_field(lambda x: np.full_like(x, np.nan)), 2.0, n_grid=101)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.3, 3))
def test_norm_homogeneous(c, shift, width):
    f = profile("gauss", shift=shift, width=width)
    a = xbeta_norm(scalar_field(lambda x: c * f(x)), 2.0).value
    b = xbeta_norm(scalar_field(f), 2.0).value
    assert abs(a - abs(c) * b) <= 1e-12 * max(1.0, abs(c) * b)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_triangle_inequality(s1, s2, c):
    f, g = profile("sech2", shift=s1), profile("gauss", shift=s2)
    nf = xbeta_norm(scalar_field(f), 2.0).value
    ng = xbeta_norm(scalar_field(lambda x: c * g(x)), 2.0).value
    nfg = xbeta_norm(scalar_field(lambda x: f(x) + c * g(x)), 2.0).value
    assert nfg <= nf + ng + 1e-12


def test_example_eigenpair_identity(lam0):
    ex = make_example5(lam0)
    xs = np.linspace(-10, 10, 2001)
    s = 1 / np.cosh(xs)
    # -(sech)'' = -(sech - 2 sech^3); residual of -u'' + (V_c - lam0) u
    r = -(s - 2 * s ** 3) + (ex.potential.A(xs)[:, 0, 0] - lam0) * s
    assert np.max(np.abs(r)) < 1e-10
    assert ex.metadata["exact_eigenpair"]


def test_example_eigenfunction_normalised(ex5):
    val, _ = quad(lambda x: float(np.sum(ex5.u_star(np.array([x])) ** 2)), -np.inf, np.inf)
    assert abs(val - 1) < 1e-10


def test_example_structure(ex5):
    pot = ex5.potential
    xs = np.linspace(-7, 7, 301)
    assert pot.symmetry_defect(xs) == 0.0
    assert pot.periodicity_defect(xs) < 1e-12
    A = pot.A(xs)
    assert np.all(A[:, 0, 1] == 0) and np.all(A[:, 1, 0] == 0)


def test_diagonal_constructor():
    B = make_perturbation("diagonal", {0: profile("sech2")})
    xs = np.linspace(-3, 3, 7)
    expected = np.zeros((7, 2, 2))
    expected[:, 0, 0] = 1 / np.cosh(xs) ** 2
    assert np.allclose(B(xs), expected, atol=0)


def test_tbeta_structure_and_membership():
    B = make_perturbation("T_beta", {(0, 1): profile("sech2")}, n=3)
    b = B(np.linspace(-4, 4, 9))
    assert np.all(np.einsum("mii->mi", b) == 0)
    assert np.all(b[:, 1:, 1:] == 0)
    assert np.allclose(b, np.swapaxes(b, 1, 2))
    assert validate_perturbation(B) == 0.0
    full = make_perturbation("full", {(0, 1): profile("sech2")}, n=3)
    assert validate_perturbation(full) == 0.0


@pytest.mark.parametrize("cls,profiles", [
    ("diagonal", {(0, 1): profile("sech2")}),
    ("T_beta", {(1, 1): profile("sech2")}),
    ("T_beta", {(1, 2): profile("sech2")}),
    ("offdiag_row1", {(0, 1): profile("sech2"), (0, 2): profile("sech2")}),
    ("nonsense", {}),
])
def test_class_constraints_enforced(cls, profiles):
    with pytest.raises(ConfigError):
        make_perturbation(cls, profiles, n=3)


def test_slow_decay_rejected():
    with pytest.raises(ConfigError):
        make_perturbation("diagonal", {0: lambda x: (1 + np.abs(x)) ** -1.0}, beta=2.0)


def test_normalised_direction():
    B = make_perturbation("T_beta", {(0, 1): profile("sech2")}, epsilon=3.0).normalized()
    assert abs(B.norm().value - 1) < 1e-12
    assert isinstance(B.scaled(0.5), Perturbation)
    assert abs(B.scaled(0.5).norm().value - 0.5) < 1e-12


def test_table_potential_interpolates():
    p = np.pi
    x = np.linspace(-12, 12, 2401)
    xp = np.linspace(0, p, 201)
    Ap = (2 * np.cos(2 * xp))[:, None, None]
    A = (2 * np.cos(2 * x) - 2 / np.cosh(x) ** 2)[:, None, None]
    pot = table_potential(x, A, Ap, p)
    xs = np.linspace(-20, 20, 97)
    exact = 2 * np.cos(2 * xs) - np.where(np.abs(xs) <= 12, 2 / np.cosh(xs) ** 2, 0)
    assert np.max(np.abs(pot.A(xs)[:, 0, 0] - exact)) < 1e-6
    assert pot.periodicity_defect(xs) < 1e-12
