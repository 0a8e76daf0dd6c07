"""Dense symmetric positive definite linear algebra.

Everything runs in float64. Factorisations go through LAPACK (via scipy);
this module only adds the jitter ladder, the cached log-determinant and the
trace of the inverse.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .exceptions import DimensionMismatch, NotPositiveDefinite

# Relative to the mean diagonal entry.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``L`` of an SPD matrix ``A = L L^T``."""

    lower_factor: np.ndarray
    log_det: float
    jitter: float = 0.0

    @property
    def dim(self):
        return self.lower_factor.shape[0]

    def matrix(self):
        """Reconstruct the factored matrix (including any jitter that was added)."""
        L = self.lower_factor
        return L @ L.T


def _as_square(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def cholesky(m, jitter=0.0, escalate=True):
    """Factor a symmetric positive definite matrix.

    ``jitter`` is an absolute amount added to the diagonal. If the
    factorisation fails and ``escalate`` is set, relative jitter from
    ``JITTER_LADDER`` (scaled by the mean diagonal) is added on top before
    giving up with :class:`NotPositiveDefinite`.
    """
    m = _as_square(m)
    scale = np.abs(np.trace(m)) / max(m.shape[0], 1)
    if not np.allclose(m, m.T, rtol=1e-8, atol=1e-8 * max(scale, 1e-300)):
        raise ValueError("matrix is not symmetric")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")

    ladder = JITTER_LADDER if escalate else (0.0,)
    for rel in ladder:
        extra = jitter + rel * scale
        a = m + extra * np.eye(m.shape[0]) if extra > 0 else m
        try:
            L = la.cholesky(a, lower=True, check_finite=False)
        except la.LinAlgError:
            continue
        diag = np.diag(L)
        if np.all(diag > 0):
            return SpdFactor(L, float(2.0 * np.sum(np.log(diag))), extra)
    raise NotPositiveDefinite(
        f"Cholesky failed for a {m.shape[0]}x{m.shape[0]} matrix after jitter up to "
        f"{jitter + ladder[-1] * scale:.3g}"
    )


def solve(f, b):
    """Solve ``A x = b`` given the factor of ``A``; ``b`` may be a vector or matrix."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor has dim {f.dim}")
    return la.cho_solve((f.lower_factor, True), b, check_finite=False)


def inverse_lower(f):
    """``L^{-1}`` as a dense lower-triangular matrix."""
    inv, info = la.lapack.dtrtri(f.lower_factor, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"triangular inversion failed (info={info})")
    return inv


def trace_inverse(f):
    """``Tr(A^{-1})`` computed as the squared Frobenius norm of ``L^{-1}``."""
    return float(np.sum(inverse_lower(f) ** 2))


def quad_form(f, x):
    """``x^T A^{-1} x`` for vector ``x``, or the row-wise values for a matrix of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != f.dim:
        raise DimensionMismatch(f"vector length {x.shape[-1]} vs factor dim {f.dim}")
    z = la.solve_triangular(f.lower_factor, x.T, lower=True, check_finite=False)
    return np.sum(z**2, axis=0)
