"""Evidence objectives for hyperparameter selection, in nats.

* ``laplace_evidence_lf``: Laplace evidence at the expansion point, first-order
  term dropped (what online Laplace maximises).
* ``tangent_evidence_lh``: exact evidence of the tangent linear model, i.e. the
  Laplace evidence with the first-order term kept (mode-corrected).
* ``elbo``: the Gaussian variational bound on the tangent evidence with
  posterior ``N(mu, H^{-1})``. It equals ``lf`` at ``mu = w_t`` and ``lh`` at
  ``mu = v*``.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite
from .tangent import gauss_newton_map

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EvidenceBreakdown:
    prior_logdet: float
    noise_logdet: float
    data_fit: float
    prior_fit: float
    curvature: float
    constant: float

    @property
    def total(self):
        return (
            self.prior_logdet
            + self.noise_logdet
            + self.data_fit
            + self.prior_fit
            + self.curvature
            + self.constant
        )

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


def elbo(t, g, mu, y, m):
    mu = np.asarray(mu, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if mu.shape != (t.n_params,) or y.shape != (t.n,):
        raise DimensionMismatch(
            f"mu {mu.shape} / y {y.shape} do not fit a tangent model with "
            f"n={t.n}, d_w={t.n_params}"
        )
    r = y - t.predict(mu)
    return EvidenceBreakdown(
        prior_logdet=0.5 * t.n_params * math.log(m.alpha),
        noise_logdet=0.5 * t.n * math.log(m.beta),
        data_fit=-0.5 * m.beta * float(r @ r),
        prior_fit=-0.5 * m.alpha * float(mu @ mu),
        curvature=-0.5 * g.log_det,
        constant=-0.5 * t.n * LOG_2PI,
    )


def laplace_evidence_lf(t, g, y, m):
    """Laplace evidence with the expansion point treated as a mode."""
    return elbo(t, g, t.w_t, y, m)


def tangent_evidence_lh(t, g, y, m, v_star=None):
    """Tangent-model evidence; pass ``v_star`` to reuse an already computed MAP."""
    if v_star is None:
        v_star = gauss_newton_map(t, m, g, y)
    return elbo(t, g, v_star, y, m)


def exact_marginal_oracle(t, y, m):
    """``log N(y; f(w_t) - J w_t, I/beta + J J^T/alpha)`` computed without the GGN factor.

    Uses the ``n x n`` covariance when ``n < d_w`` and the Woodbury /
    determinant-lemma primal form otherwise.
    """
    y = np.asarray(y, dtype=np.float64)
    J = t.J
    n, d = J.shape
    r = y - (t.f_wt - J @ t.w_t)
    if n < d:
        C = J @ J.T / m.alpha
        C[np.diag_indices_from(C)] += 1.0 / m.beta
        sign, logdet = np.linalg.slogdet(C)
        quad = float(r @ np.linalg.solve(C, r))
    else:
        A = m.beta * (J.T @ J) + m.alpha * np.eye(d)
        sign, logdet_a = np.linalg.slogdet(A)
        logdet = logdet_a - d * math.log(m.alpha) - n * math.log(m.beta)
        Jr = J.T @ r
        quad = m.beta * float(r @ r) - m.beta**2 * float(Jr @ np.linalg.solve(A, Jr))
    if sign <= 0:
        raise NotPositiveDefinite("marginal covariance is not positive definite")
    return -0.5 * (quad + logdet + n * LOG_2PI)
