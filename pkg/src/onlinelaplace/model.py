"""Single-hidden-layer tanh MLP regressor: predictions, loss, gradient and Jacobian.

Parameters live in one flat float64 vector laid out as

    [W1 (d_x * H, row-major), b1 (H), w2 (H), b2 (1)]

so ``d_w = (d_x + 1) * H + H + 1``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch


@dataclass(frozen=True)
class Hyperparams:
    """Prior precision ``alpha`` and observation-noise precision ``beta``."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_units: int = 50
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_units < 1:
            raise ValueError("input_dim and hidden_units must be >= 1")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def n_params(self):
        return (self.input_dim + 1) * self.hidden_units + self.hidden_units + 1

    def unpack(self, w):
        d, h = self.input_dim, self.hidden_units
        W1 = w[: d * h].reshape(d, h)
        b1 = w[d * h : d * h + h]
        w2 = w[d * h + h : d * h + 2 * h]
        b2 = w[-1]
        return W1, b1, w2, b2

    def pack(self, W1, b1, w2, b2):
        return np.concatenate(
            [np.ravel(W1), np.ravel(b1), np.ravel(w2), np.atleast_1d(b2)]
        ).astype(np.float64)

    def init_params(self, rng):
        """Zero biases; weights ~ N(0, 1/fan_in)."""
        d, h = self.input_dim, self.hidden_units
        W1 = rng.standard_normal((d, h)) / math.sqrt(d)
        w2 = rng.standard_normal(h) / math.sqrt(h)
        return self.pack(W1, np.zeros(h), w2, 0.0)

    def _hidden(self, w, X):
        W1, b1, w2, b2 = self.unpack(w)
        Z = np.tanh(X @ W1 + b1)
        return Z, w2, b2

    def forward(self, w, X):
        Z, w2, b2 = self._hidden(w, X)
        return Z @ w2 + b2

    def residual_vjp(self, w, X, y, scale):
        """Predictions ``f`` and ``J^T (scale * (f - y))`` in one backward sweep."""
        Z, w2, b2 = self._hidden(w, X)
        f = Z @ w2 + b2
        r = scale * (f - y)
        Dr = (1.0 - Z**2) * w2 * r[:, None]
        return f, self.pack(X.T @ Dr, Dr.sum(axis=0), Z.T @ r, r.sum())

    def jacobian(self, w, X):
        Z, w2, _ = self._hidden(w, X)
        n = X.shape[0]
        D = (1.0 - Z**2) * w2
        J = np.empty((n, self.n_params))
        dh = self.input_dim * self.hidden_units
        h = self.hidden_units
        J[:, :dh] = (X[:, :, None] * D[:, None, :]).reshape(n, dh)
        J[:, dh : dh + h] = D
        J[:, dh + h : dh + 2 * h] = Z
        J[:, -1] = 1.0
        return J


@dataclass(frozen=True)
class LinearArchitecture:
    """``f(w) = X w``; its tangent model is exact everywhere."""

    input_dim: int

    @property
    def n_params(self):
        return self.input_dim

    def init_params(self, rng):
        return rng.standard_normal(self.input_dim) / math.sqrt(self.input_dim)

    def forward(self, w, X):
        return X @ w

    def residual_vjp(self, w, X, y, scale):
        f = X @ w
        return f, X.T @ (scale * (f - y))

    def jacobian(self, w, X):
        return np.array(X, dtype=np.float64, copy=True)


def _check(arch, w, X, y=None):
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != arch.n_params:
        raise DimensionMismatch(f"expected {arch.n_params} parameters, got shape {w.shape}")
    if X.ndim != 2 or X.shape[1] != arch.input_dim:
        raise DimensionMismatch(f"expected inputs with {arch.input_dim} columns, got {X.shape}")
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(f"targets shape {y.shape} does not match {X.shape[0]} rows")
    return w, X, y


def forward(arch, w, X):
    w, X, _ = _check(arch, w, X)
    return arch.forward(w, X)


def loss(arch, w, X, y, m):
    """``beta/2 ||y - f(w)||^2 + alpha/2 ||w||^2``."""
    w, X, y = _check(arch, w, X, y)
    r = y - arch.forward(w, X)
    return 0.5 * m.beta * float(r @ r) + 0.5 * m.alpha * float(w @ w)


def loss_and_gradient(arch, w, X, y, m):
    w, X, y = _check(arch, w, X, y)
    f, g = arch.residual_vjp(w, X, y, m.beta)
    r = f - y
    value = 0.5 * m.beta * float(r @ r) + 0.5 * m.alpha * float(w @ w)
    return value, g + m.alpha * w


def loss_gradient(arch, w, X, y, m):
    return loss_and_gradient(arch, w, X, y, m)[1]


def jacobian(arch, w, X):
    """``n x d_w`` matrix whose row ``i`` is the gradient of prediction ``i``."""
    w, X, _ = _check(arch, w, X)
    return arch.jacobian(w, X)
