"""Linearised-Laplace predictive distribution and regression metrics."""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch
from .model import forward, jacobian

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PredictiveGaussian:
    """Per-point Gaussian predictions; ``mean`` and ``variance`` are arrays of equal length."""

    mean: np.ndarray
    variance: np.ndarray

    def __len__(self):
        return len(self.mean)

    @property
    def std(self):
        return np.sqrt(self.variance)

    def rescale(self, scale, shift=0.0):
        """Map standardised predictions back to original target units."""
        return PredictiveGaussian(self.mean * scale + shift, self.variance * scale**2)


def predictive_variance(arch, w, g, X_star, m):
    """``j(x*)^T H^{-1} j(x*) + 1/beta`` for each row of ``X_star``."""
    J_star = jacobian(arch, w, X_star)
    return linalg.quad_form(g.factor, J_star) + 1.0 / m.beta


def predict(arch, w, g, X_star, m, v_star=None):
    """Predictive mean and variance at ``X_star``.

    The mean is the network output ``f(x*; w)``; passing ``v_star`` switches to
    the tangent-model mean ``f(x*; w) + j(x*)^T (v* - w)``.
    """
    X_star = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    J_star = jacobian(arch, w, X_star)
    mean = forward(arch, w, X_star)
    if v_star is not None:
        mean = mean + J_star @ (np.asarray(v_star) - np.asarray(w))
    var = linalg.quad_form(g.factor, J_star) + 1.0 / m.beta
    return PredictiveGaussian(mean, var)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def gaussian_log_likelihood(mean, variance, y):
    """Mean over points of ``log N(y_i; mean_i, variance_i)``."""
    mean, y = _pair(mean, y)
    variance, _ = _pair(variance, y)
    return float(np.mean(-0.5 * (LOG_2PI + np.log(variance) + (y - mean) ** 2 / variance)))


def log_likelihood(preds, y_test):
    return gaussian_log_likelihood(preds.mean, preds.variance, y_test)


def rmse(means, y_test):
    means, y_test = _pair(means, y_test)
    return float(np.sqrt(np.mean((means - y_test) ** 2)))
