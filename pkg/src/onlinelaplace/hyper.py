"""MacKay's closed-form update of the prior and noise precisions.

With ``gamma = d_w - alpha Tr(H^{-1})`` the effective number of
well-determined parameters::

    alpha <- gamma / ||mu||^2
    beta  <- (n - gamma) / ||y - y_hat||^2

Online Laplace (``"ol"``) plugs in ``mu = w`` and ``y_hat = f(w)``; the online
linear model (``"lm"``) plugs in the tangent MAP ``mu = v*`` and
``y_hat = h(v*)``. Fixed points of the update are stationary points of the
corresponding evidence.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DegenerateNorm
from .model import Hyperparams
from .tangent import gauss_newton_map, ggn

GAMMA_MARGIN = 1e-3
HYPER_MIN = 1e-6
HYPER_MAX = 1e8
NORM_FLOOR = 1e-12

MODES = ("ol", "lm")


@dataclass(frozen=True)
class GammaDiagnostic:
    gamma: float
    clamped: bool
    raw_gamma: float
    degenerate: bool = False


def effective_dimensions(g):
    return g.dim - g.hyper.alpha * linalg.trace_inverse(g.factor)


def _clip(v):
    return min(max(v, HYPER_MIN), HYPER_MAX)


def mackay_targets(g, mu, y, y_hat, on_degenerate="clamp"):
    """Undamped MacKay targets ``(alpha, beta)`` and the gamma diagnostic.

    ``g`` must be the GGN built with the current hyperparameters.
    """
    mu = np.asarray(mu, dtype=np.float64)
    resid = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    n = resid.shape[0]
    d = g.dim

    raw = effective_dimensions(g)
    hi = min(d, n) - GAMMA_MARGIN
    gamma = min(max(raw, GAMMA_MARGIN), hi)
    clamped = gamma != raw

    mu_sq = float(mu @ mu)
    r_sq = float(resid @ resid)
    degenerate = mu_sq < NORM_FLOOR or r_sq < NORM_FLOOR
    if degenerate and on_degenerate == "raise":
        which = "||mu||^2" if mu_sq < NORM_FLOOR else "||y - y_hat||^2"
        raise DegenerateNorm(f"{which} is below the floor {NORM_FLOOR:g}")

    alpha = gamma / mu_sq if mu_sq >= NORM_FLOOR else HYPER_MAX
    beta = (n - gamma) / r_sq if r_sq >= NORM_FLOOR else HYPER_MAX
    diag = GammaDiagnostic(gamma, clamped, raw, degenerate)
    return Hyperparams(_clip(alpha), _clip(beta)), diag


def mackay_update(g, mu, y, y_hat, m=None, damping=1.0, on_degenerate="clamp"):
    """One MacKay step, optionally damped in log-space.

    ``damping`` interpolates ``log alpha`` and ``log beta`` between the current
    value (0) and the MacKay target (1). Returns ``(Hyperparams, GammaDiagnostic)``.
    """
    if not 0.0 <= damping <= 1.0:
        raise ValueError("damping must lie in [0, 1]")
    m = g.hyper if m is None else m
    target, diag = mackay_targets(g, mu, y, y_hat, on_degenerate)
    return damp(m, target, damping), diag


def damp(m, target, damping):
    if damping == 1.0:
        return target
    if damping == 0.0:
        return m
    alpha = math.exp((1 - damping) * math.log(m.alpha) + damping * math.log(target.alpha))
    beta = math.exp((1 - damping) * math.log(m.beta) + damping * math.log(target.beta))
    return Hyperparams(alpha, beta)


def residual_between(m, target):
    return max(abs(m.alpha - target.alpha) / m.alpha, abs(m.beta - target.beta) / m.beta)


def fixed_point_residual(g, mu, y, y_hat, m=None):
    """Largest relative change an undamped MacKay step would make; 0 at a fixed point."""
    m = g.hyper if m is None else m
    target, _ = mackay_targets(g, mu, y, y_hat)
    return residual_between(m, target)


@dataclass
class MacKayStep:
    """Everything one update on a tangent model computes along the way."""

    ggn: object
    v_star: np.ndarray
    target: Hyperparams
    new: Hyperparams
    gamma: GammaDiagnostic

    @property
    def residual(self):
        return residual_between(self.ggn.hyper, self.target)


def mackay_step(t, y, m, mode="ol", damping=1.0, jitter=0.0):
    """Build the GGN at ``m``, find ``v*`` and take one MacKay step with the chosen substitution."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    g = ggn(t, m, jitter=jitter)
    v_star = gauss_newton_map(t, m, g, y)
    if mode == "ol":
        mu, y_hat = t.w_t, t.f_wt
    else:
        mu, y_hat = v_star, t.predict(v_star)
    target, diag = mackay_targets(g, mu, y, y_hat)
    return MacKayStep(g, v_star, target, damp(m, target, damping), diag)


@dataclass(frozen=True)
class IterationResult:
    hyper: Hyperparams
    n_iter: int
    residual: float
    converged: bool


def iterate_mackay(t, y, m, mode="lm", tol=1e-6, max_iter=500, jitter=0.0):
    """Iterate MacKay updates on a frozen tangent model until the residual drops below ``tol``.

    The residual is checked before each update, so a starting point that is
    already a fixed point returns with ``n_iter == 0``.
    """
    n_iter = 0
    while True:
        step = mackay_step(t, y, m, mode, jitter=jitter)
        res = step.residual
        if res < tol:
            return IterationResult(m, n_iter, res, True)
        if n_iter >= max_iter:
            return IterationResult(m, n_iter, res, False)
        m = step.new
        n_iter += 1
