"""Tangent linear model of a network at a linearisation point.

``h(v) = f(w_t) + J (v - w_t)`` is a Bayesian linear model sharing the
network's hyperparameters. Its curvature is the GGN ``H = beta J^T J + alpha I``
and its MAP is one Gauss-Newton step away from ``w_t``.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch
from .model import jacobian, forward


@dataclass(frozen=True)
class TangentModel:
    w_t: np.ndarray
    f_wt: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        n, d = self.J.shape
        if self.w_t.shape != (d,) or self.f_wt.shape != (n,):
            raise DimensionMismatch(
                f"inconsistent tangent model: w_t {self.w_t.shape}, f {self.f_wt.shape}, J {self.J.shape}"
            )

    @property
    def n(self):
        return self.J.shape[0]

    @property
    def n_params(self):
        return self.J.shape[1]

    def predict(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.w_t.shape:
            raise DimensionMismatch(f"expected {self.w_t.shape} parameters, got {v.shape}")
        return self.f_wt + self.J @ (v - self.w_t)


@dataclass(frozen=True)
class GgnFactor:
    hyper: object
    factor: linalg.SpdFactor

    @property
    def log_det(self):
        return self.factor.log_det

    @property
    def dim(self):
        return self.factor.dim


def linearize(arch, w_t, X):
    w_t = np.array(w_t, dtype=np.float64)
    return TangentModel(w_t, forward(arch, w_t, X), jacobian(arch, w_t, X))


def from_arrays(w_t, f_wt, J):
    """Build a tangent model directly from its three defining arrays."""
    return TangentModel(
        np.array(w_t, dtype=np.float64),
        np.array(f_wt, dtype=np.float64),
        np.atleast_2d(np.array(J, dtype=np.float64)),
    )


def ggn_matrix(t, m):
    H = m.beta * (t.J.T @ t.J)
    H[np.diag_indices_from(H)] += m.alpha
    return H


def ggn(t, m, jitter=0.0):
    """Cholesky-factored ``beta J^T J + alpha I``."""
    return GgnFactor(m, linalg.cholesky(ggn_matrix(t, m), jitter=jitter))


def _check_y(t, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (t.n,):
        raise DimensionMismatch(f"targets shape {y.shape}, expected ({t.n},)")
    return y


def tangent_gradient(t, v, y, m):
    """``beta J^T (h(v) - y) + alpha v``."""
    y = _check_y(t, y)
    return m.beta * (t.J.T @ (t.predict(v) - y)) + m.alpha * np.asarray(v, dtype=np.float64)


def gauss_newton_map(t, m, g, y):
    """MAP of the tangent model: ``w_t - H^{-1} (beta J^T (f(w_t) - y) + alpha w_t)``."""
    y = _check_y(t, y)
    grad = m.beta * (t.J.T @ (t.f_wt - y)) + m.alpha * t.w_t
    return t.w_t - linalg.solve(g.factor, grad)


def tangent_loss(t, v, y, m):
    """``beta/2 ||y - h(v)||^2 + alpha/2 ||v||^2``."""
    y = _check_y(t, y)
    v = np.asarray(v, dtype=np.float64)
    r = y - t.predict(v)
    return 0.5 * m.beta * float(r @ r) + 0.5 * m.alpha * float(v @ v)
