"""Gaussian-process surrogate with a Matérn-5/2 ARD kernel.

Hyperparameters (log lengthscales, log signal variance, constant mean) are
fitted by maximising the log marginal likelihood with L-BFGS-B from several
seeded starting points, using the analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ..errors import ContractViolation, NumericalError

SQRT5 = np.sqrt(5.0)
JITTER = 1e-6
MAX_JITTER = 1e-3
LOG_LS_BOUNDS = (np.log(0.05), np.log(20.0))
LOG_SF_BOUNDS = (np.log(0.05), np.log(20.0))
MEAN_BOUNDS = (-3.0, 3.0)


def matern52(x1: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray, variance: float) -> np.ndarray:
    r = cdist(x1 / lengthscales, x2 / lengthscales)
    return variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _cholesky(k: np.ndarray, jitter: float):
    """Cholesky with jitter escalation; returns (factor, jitter used)."""
    j = jitter
    eye = np.eye(len(k))
    while j <= MAX_JITTER * (1 + 1e-9):
        try:
            return cho_factor(k + j * eye, lower=True, check_finite=False), j
        except np.linalg.LinAlgError:
            j *= 10.0
    raise NumericalError("kernel matrix is singular even with jitter 1e-3")


def _sq_diffs(x: np.ndarray) -> np.ndarray:
    """Squared coordinate differences, shape (n*n, d)."""
    n, dim = x.shape
    return ((x[:, None, :] - x[None, :, :]) ** 2).reshape(n * n, dim)


def neg_log_marginal_likelihood(theta: np.ndarray, x: np.ndarray, y: np.ndarray, jitter: float = JITTER,
                                sq: np.ndarray | None = None):
    """Negative LML and its gradient for theta = [log ls (d), log sf2, mean].

    ``sq`` may carry precomputed :func:`_sq_diffs` of ``x``.
    """
    n, dim = x.shape
    sq = _sq_diffs(x) if sq is None else sq
    inv_l2 = np.exp(-2.0 * theta[:dim])
    sf2 = np.exp(theta[dim])
    mean = theta[dim + 1]
    r = np.sqrt(np.maximum(sq @ inv_l2, 0.0)).reshape(n, n)
    e = np.exp(-SQRT5 * r)
    k = sf2 * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e
    try:
        (c, low), used = _cholesky(k, jitter)
    except NumericalError:
        return 1e25, np.zeros_like(theta)
    resid = y - mean
    alpha = cho_solve((c, low), resid, check_finite=False)
    nll = 0.5 * resid @ alpha + np.log(np.diag(c)).sum() + 0.5 * n * np.log(2 * np.pi)
    kinv = cho_solve((c, low), np.eye(n), check_finite=False)
    w = np.outer(alpha, alpha) - kinv  # dLML/dK = 0.5 * w
    grad = np.empty_like(theta)
    # dk/dlog(l_k) = sf2 * 5/3 * (1 + sqrt5 r) exp(-sqrt5 r) * d_k^2 / l_k^2
    base = sf2 * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    grad[:dim] = -0.5 * ((w * base).ravel() @ sq) * inv_l2
    grad[dim] = -0.5 * np.sum(w * k)
    grad[dim + 1] = -alpha.sum()
    return float(nll), grad


@dataclass
class GaussianProcess:
    x: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    variance: float
    mean: float
    jitter: float
    y_mu: float
    y_sd: float

    def __post_init__(self):
        k = matern52(self.x, self.x, self.lengthscales, self.variance)
        (self._c, self._low), self.jitter = _cholesky(k, self.jitter)
        self._alpha = cho_solve((self._c, self._low), self.y - self.mean, check_finite=False)

    def predict_standardized(self, xs: np.ndarray):
        ks = matern52(np.atleast_2d(xs), self.x, self.lengthscales, self.variance)
        mu = self.mean + ks @ self._alpha
        v = solve_triangular(self._c, ks.T, lower=True, check_finite=False)
        var = np.maximum(self.variance - (v * v).sum(0), 0.0)
        return mu, var

    def predict(self, xs: np.ndarray):
        """Posterior mean and standard deviation in original units."""
        mu, var = self.predict_standardized(xs)
        return mu * self.y_sd + self.y_mu, np.sqrt(var) * self.y_sd


def fit_gp(x: np.ndarray, y: np.ndarray, rng: np.random.Generator, restarts: int = 5,
           maxiter: int = 200, jitter: float = JITTER) -> GaussianProcess:
    """Fit one GP to ``(x, y)``; y is standardised internally."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ContractViolation("a surrogate needs at least two observations")
    # identical inputs carry no extra information for a noiseless GP
    _, keep = np.unique(x, axis=0, return_index=True)
    keep = np.sort(keep)
    x, y = x[keep], y[keep]
    y_mu = float(y.mean())
    y_sd = float(y.std()) or 1.0
    ys = (y - y_mu) / y_sd
    dim = x.shape[1]
    bounds = [LOG_LS_BOUNDS] * dim + [LOG_SF_BOUNDS, MEAN_BOUNDS]
    sq = _sq_diffs(x)
    best = None
    for k in range(restarts):
        if k == 0:
            start = np.concatenate([np.zeros(dim), [0.0], [0.0]])
        else:
            start = np.concatenate([
                rng.uniform(np.log(0.2), np.log(5.0), dim),
                [rng.uniform(np.log(0.5), np.log(2.0))],
                [rng.uniform(-0.5, 0.5)],
            ])
        res = minimize(neg_log_marginal_likelihood, start, args=(x, ys, jitter, sq), jac=True,
                       method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    th = best.x
    return GaussianProcess(x, ys, np.exp(th[:dim]), float(np.exp(th[dim])), float(th[dim + 1]), jitter,
                           y_mu, y_sd)


@dataclass
class Surrogate:
    """Independent GPs, one per objective (minimisation convention)."""

    models: tuple

    def predict(self, xs: np.ndarray):
        mus, sds = zip(*(m.predict(xs) for m in self.models))
        return np.column_stack(mus), np.column_stack(sds)


def fit_surrogate(x: np.ndarray, objectives: np.ndarray, rng: np.random.Generator, restarts: int = 5) -> Surrogate:
    objectives = np.asarray(objectives, dtype=float)
    return Surrogate(tuple(fit_gp(x, objectives[:, m], rng, restarts) for m in range(objectives.shape[1])))


__all__ = ["GaussianProcess", "Surrogate", "fit_gp", "fit_surrogate", "matern52", "neg_log_marginal_likelihood"]
