import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from embedded_spectra.decay import (fit_decay_rate, fit_eigenfunction, random_probe, rate_bands,
                                    roughness_probe, roughness_trials)
from embedded_spectra.errors import ConfigError, DecayFitError
from embedded_spectra.potentials import make_perturbation, profile
from embedded_spectra.spectral import eigenfunction, find_embedded_eigenvalue

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_synthetic_exponential():
    xs = np.linspace(-15, 15, 3001)
    fit = fit_decay_rate(xs, np.exp(-2 * np.abs(xs)), omega_min=2.0)
    assert abs(fit.left.rate - 2) < 1e-6 and abs(fit.right.rate - 2) < 1e-6
    assert fit.r2 > 0.999999


def test_vector_samples_use_norm():
    xs = np.linspace(-10, 10, 2001)
    e = np.exp(-np.abs(xs))
    U = np.stack([3 * e, 4 * e], axis=1)
    assert abs(fit_decay_rate(xs, U, 1.0).rate - 1) < 1e-9


def test_example_rate(ef0):
    fit = fit_eigenfunction(ef0)
    assert abs(ef0.omega_min - 1) < 1e-8
    assert abs(fit.left.rate - 1) < 0.02 and abs(fit.right.rate - 1) < 0.02
    assert fit.r2 > 0.99
    assert fit.within_bound()


def test_perturbed_rate_close(ex5, lam0, ef0):
    B = make_perturbation("diagonal", {0: profile("sech2")}, epsilon=0.01)
    ef = eigenfunction(find_embedded_eigenvalue(ex5.potential, lam0, B))
    assert abs(fit_eigenfunction(ef).rate - fit_eigenfunction(ef0).rate) < 0.05


def test_non_monotone_tail_rejected():
    xs = np.linspace(-10, 10, 2001)
    with pytest.raises(DecayFitError):
        fit_decay_rate(xs, np.exp(-np.abs(xs)) * (1.5 + np.cos(3 * xs)), 1.0)


def test_rate_above_omega_rejected():
    xs = np.linspace(-10, 10, 2001)
    with pytest.raises(DecayFitError):
        fit_decay_rate(xs, np.exp(-2 * np.abs(xs)), omega_min=1.0)
    fit = fit_decay_rate(xs, np.exp(-2 * np.abs(xs)), omega_min=1.0, check=False)
    assert not fit.within_bound()


def test_window_outside_range():
    xs = np.linspace(-5, 5, 101)
    with pytest.raises(ValueError):
        fit_decay_rate(xs, np.exp(-np.abs(xs)), 1.0, window=(2.0, 8.0))


def test_base_rates_reproduced():
    r = roughness_probe(np.diag([1.0, -1.0]))
    assert abs(r.measured_s + 1) < 1e-3 and abs(r.measured_u - 1) < 1e-3


def test_rotation_generator_probe():
    delta = 0.05
    r = roughness_probe(np.diag([1.0, -1.0]), lambda xs: delta * np.broadcast_to(ROT, (len(xs), 2, 2)),
                        delta)
    assert abs(r.K - 1) < 1e-12
    # constant perturbation: exact rates are -/+ sqrt(1 - delta^2)
    assert abs(r.measured_s + np.sqrt(1 - delta ** 2)) < 1e-3
    assert -1 - 1e-2 <= r.measured_s <= -1 + 2 * delta + 1e-2
    assert r.passed


def test_shifted_rates():
    nu = 0.8
    R = np.zeros((4, 4))
    R[:2, :2] = [[0, 1], [1, 0]]
    R[2:, 2:] = [[0, nu], [-nu, 0]]
    b = rate_bands(R + 0.3 * np.eye(4))
    assert abs(b.kappa_s + 0.7) < 1e-12 and abs(b.kappa_u - 0.3) < 1e-12
    r = roughness_probe(R, eta=0.3)
    assert abs(r.measured_s + 0.7) < 1e-3
    assert abs(r.measured_u - 0.3) < 1e-3


def test_precondition_enforced():
    with pytest.raises(ConfigError):
        roughness_probe(np.diag([1.0, -1.0]), lambda xs: np.zeros((len(xs), 2, 2)), 0.6)
    with pytest.raises(ConfigError):
        roughness_probe(np.diag([1.0, 2.0]))
    with pytest.raises(ConfigError):
        roughness_probe(np.diag([1.0, -1.0]), delta=-0.1)


def test_probe_perturbation_bounded():
    pr = random_probe(np.random.default_rng(3))
    xs = np.linspace(0, 50, 2001)
    assert np.max(np.linalg.norm(pr.D(xs), 2, axis=(1, 2))) <= pr.delta * (1 + 1e-12)
    assert abs(rate_bands(pr.R).K - 1) < 1e-8


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_probe_rates_in_bands(seed):
    rng = np.random.default_rng(seed)
    pr = random_probe(rng)
    r = roughness_probe(pr.R, pr.D, pr.delta, horizon=40.0, seed=seed)
    assert r.passed


def test_trials_thread_independent():
    a = roughness_trials(3, seed=7, horizon=20.0)
    b = roughness_trials(3, seed=7, horizon=20.0, threads=3)
    assert [(x.measured_s, x.measured_u) for x in a] == [(x.measured_s, x.measured_u) for x in b]
