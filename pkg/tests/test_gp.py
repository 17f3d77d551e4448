import numpy as np
import pytest
from scipy.optimize import approx_fprime

from memexplorer.dse.gp import fit_gp, fit_surrogate, matern52, neg_log_marginal_likelihood


def test_matern_diagonal_is_variance():
    x = np.random.default_rng(0).uniform(size=(5, 3))
    k = matern52(x, x, np.ones(3), 2.5)
    assert np.allclose(np.diag(k), 2.5)
    assert np.allclose(k, k.T)


def test_likelihood_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(12, 3))
    y = np.sin(3 * x).sum(1)
    y = (y - y.mean()) / y.std()
    theta = np.array([-0.3, 0.1, 0.4, 0.2, 0.1])
    f, g = neg_log_marginal_likelihood(theta, x, y)
    fd = approx_fprime(theta, lambda t: neg_log_marginal_likelihood(t, x, y)[0], 1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-3, atol=1e-3)


def test_interpolates_training_data():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(15, 2))
    y = x[:, 0] ** 2 - x[:, 1]
    gp = fit_gp(x, y, np.random.default_rng(0))
    mu, sd = gp.predict(x)
    np.testing.assert_allclose(mu, y, atol=1e-2 * np.ptp(y))
    assert np.all(sd < 0.05 * np.ptp(y))


def test_identical_inputs_do_not_crash():
    x = np.array([[0.5, 0.5], [0.5, 0.5]])
    gp = fit_gp(x, np.array([1.0, 1.0]), np.random.default_rng(0))
    mu, sd = gp.predict(np.array([[0.5, 0.5]]))
    assert mu[0] == pytest.approx(1.0)


def test_far_point_reverts_to_prior():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(10, 2))
    gp = fit_gp(x, np.cos(4 * x[:, 0]) + x[:, 1], np.random.default_rng(0))
    far = x.mean(0) + 20 * gp.lengthscales.max() * np.ones(2)
    mu, var = gp.predict_standardized(far[None, :])
    assert var[0] == pytest.approx(gp.variance, rel=0.05)
    assert mu[0] == pytest.approx(gp.mean, abs=0.05 * max(1.0, abs(gp.mean)))


def test_surrogate_is_seeded():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(10, 2))
    obj = np.column_stack([x.sum(1), (x ** 2).sum(1)])
    a = fit_surrogate(x, obj, np.random.default_rng(9)).predict(x[:3])
    b = fit_surrogate(x, obj, np.random.default_rng(9)).predict(x[:3])
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
