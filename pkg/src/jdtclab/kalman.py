"""Small shared linear-Gaussian kernels used by every filter path."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["kalman_update", "innovation_likelihood"]

_LOG_TWO_PI = math.log(2.0 * math.pi)


def innovation_likelihood(residual: np.ndarray, S: np.ndarray) -> float:
    """Gaussian density of an innovation with covariance S (Cholesky based)."""
    residual = np.atleast_1d(residual)
    S = np.atleast_2d(S)
    chol = np.linalg.cholesky(S)
    alpha = np.linalg.solve(chol, residual)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(np.exp(-0.5 * (alpha @ alpha + log_det + residual.size * _LOG_TWO_PI)))


def kalman_update(
    mean: np.ndarray, cov: np.ndarray, residual: np.ndarray, H: np.ndarray, R: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """One linear(ized) measurement update.

    Returns the innovation likelihood together with the updated mean and
    covariance; the caller supplies the (already wrapped) residual so angular
    measurements work unchanged.
    """
    H = np.atleast_2d(H)
    R = np.atleast_2d(R)
    residual = np.atleast_1d(residual)
    S = H @ cov @ H.T + R
    S = 0.5 * (S + S.T)
    q = innovation_likelihood(residual, S)
    gain = cov @ H.T @ np.linalg.inv(S)
    new_mean = mean + gain @ residual
    new_cov = cov - gain @ H @ cov
    new_cov = 0.5 * (new_cov + new_cov.T)
    return q, new_mean, new_cov
