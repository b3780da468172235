"""Gaussian mixture appearance models over RGB color space.

Fitting is seeded k-means++ initialization followed by EM until the
average per-sample log-likelihood improves by less than ``LL_TOL`` (or
``MAX_EM_ITER`` iterations). Every covariance update adds ``reg * I`` so
all eigenvalues stay at or above the regularization floor, which keeps
Cholesky factorizations (and log densities) well defined even for
degenerate color clouds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError

logger = logging.getLogger(__name__)

LL_TOL = 1e-4
MAX_EM_ITER = 100
DEFAULT_COV_REG = 1e-4

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianMixture:
    """K-component mixture: positive weights summing to 1, SPD covariances."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        k = self.weights.size
        if self.means.shape[0] != k or self.covariances.shape[0] != k:
            raise RejectedInputError("component counts disagree")
        if (self.weights <= 0.0).any():
            raise RejectedInputError("mixture weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise RejectedInputError("mixture weights must sum to 1")
        try:
            self._chol = np.linalg.cholesky(self.covariances)
        except np.linalg.LinAlgError as e:
            raise RejectedInputError(f"covariance is not positive-definite: {e}")

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Log mixture density for points of shape (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n, d = x.shape
        k = self.n_components
        comp = np.empty((n, k))
        for j in range(k):
            l = self._chol[j]
            diff = x - self.means[j]
            z = np.linalg.solve(l, diff.T)  # lower-triangular system
            maha = np.sum(z * z, axis=0)
            log_det = 2.0 * np.sum(np.log(np.diag(l)))
            comp[:, j] = -0.5 * (d * _LOG_2PI + log_det + maha)
        weighted = comp + np.log(self.weights)[None, :]
        m = weighted.max(axis=1, keepdims=True)
        return (m + np.log(np.sum(np.exp(weighted - m), axis=1, keepdims=True)))[:, 0]


def gmm_density(g: GaussianMixture, x: np.ndarray) -> float:
    """Mixture density at a single point; strictly positive."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(np.exp(g.log_density(x)[0]))


def _kmeanspp_centers(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = samples.shape[0]
    centers = np.empty((k, samples.shape[1]))
    centers[0] = samples[int(rng.integers(n))]
    d2 = np.sum((samples - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = samples[idx]
        d2 = np.minimum(d2, np.sum((samples - centers[j]) ** 2, axis=1))
    return centers


def fit_gmm(
    samples: np.ndarray,
    k: int,
    seed: int,
    reg: float = DEFAULT_COV_REG,
) -> GaussianMixture:
    """Fit a K-component mixture; deterministic for a fixed seed.

    When fewer samples than components are given, K is reduced to the
    sample count (with a warning) rather than failing.
    """
    samples = np.ascontiguousarray(np.atleast_2d(samples), dtype=np.float64)
    n, d = samples.shape
    if n < 1:
        raise RejectedInputError("need at least one sample")
    if k < 1:
        raise RejectedInputError("need at least one component")
    if reg <= 0.0:
        raise RejectedInputError("covariance regularization must be positive")
    if n < k:
        logger.warning("only %d samples for %d components; reducing K", n, k)
        k = n

    rng = np.random.default_rng(seed)
    means = _kmeanspp_centers(samples, k, rng)
    weights = np.full(k, 1.0 / k)
    base_cov = np.cov(samples.T, bias=True) if n > 1 else np.zeros((d, d))
    base_cov = np.atleast_2d(base_cov) + reg * np.eye(d)
    covs = np.repeat(base_cov[None, :, :], k, axis=0)

    prev_ll = -np.inf
    eye = reg * np.eye(d)
    for _ in range(MAX_EM_ITER):
        g = GaussianMixture(weights, means, covs)
        # E step in log space.
        comp = np.empty((n, k))
        for j in range(k):
            l = g._chol[j]
            diff = samples - means[j]
            z = np.linalg.solve(l, diff.T)
            maha = np.sum(z * z, axis=0)
            log_det = 2.0 * np.sum(np.log(np.diag(l)))
            comp[:, j] = np.log(weights[j]) - 0.5 * (d * _LOG_2PI + log_det + maha)
        m = comp.max(axis=1, keepdims=True)
        log_norm = m + np.log(np.sum(np.exp(comp - m), axis=1, keepdims=True))
        resp = np.exp(comp - log_norm)
        ll = float(log_norm.mean())

        # M step.
        nk = resp.sum(axis=0) + 10.0 * np.finfo(np.float64).eps
        weights = nk / nk.sum()
        means = (resp.T @ samples) / nk[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            diff = samples - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j] + eye

        if abs(ll - prev_ll) < LL_TOL:
            break
        prev_ll = ll
    return GaussianMixture(weights, means, covs)
