"""Dense matrix primitives: centering, covariances, inverse square roots.

All matrices are laid out samples-as-rows (``N x d``).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, ParameterError, SingularityError

DEFAULT_EPS = 1e-4
EIG_TOL = 1e-12


def as_matrix(x, name="x"):
    """Return ``x`` as a finite, non-empty 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DegenerateInputError(f"{name} contains NaN or Inf")
    return a


def center_columns(x):
    """Subtract the column means.

    Returns
    -------
    centered : ndarray (N, d)
    mean : ndarray (d,)
    """
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise DegenerateInputError(f"need at least 2 rows to center, got {x.shape[0]}")
    mean = x.mean(axis=0)
    return x - mean, mean


@dataclass(frozen=True)
class CovarianceSet:
    """Regularized auto-covariances and the cross-covariance of two views.

    ``syx`` is not stored; use ``sxy.T``.
    """

    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    reg_epsilon: float
    n_samples: int

    @property
    def syx(self):
        return self.sxy.T


def covariance(xc, yc, reg_epsilon=DEFAULT_EPS):
    """Sample covariances of two centered views with divisor ``N - 1``.

    ``reg_epsilon * I`` is added to both auto-covariances (not to ``sxy``).
    """
    xc = as_matrix(xc, "xc")
    yc = as_matrix(yc, "yc")
    if xc.shape[0] != yc.shape[0]:
        raise DimensionError(f"row counts differ: {xc.shape[0]} vs {yc.shape[0]}")
    if reg_epsilon < 0:
        raise ParameterError(f"reg_epsilon must be >= 0, got {reg_epsilon}")
    n = xc.shape[0]
    if n < 2:
        raise DegenerateInputError(f"need at least 2 samples, got {n}")
    sxx = xc.T @ xc / (n - 1)
    syy = yc.T @ yc / (n - 1)
    # exact symmetry; matmul rounding can differ across the diagonal
    sxx = 0.5 * (sxx + sxx.T) + reg_epsilon * np.eye(xc.shape[1])
    syy = 0.5 * (syy + syy.T) + reg_epsilon * np.eye(yc.shape[1])
    sxy = xc.T @ yc / (n - 1)
    return CovarianceSet(sxx, syy, sxy, float(reg_epsilon), n)


def inv_sqrt_sym(a, tol=EIG_TOL):
    """Inverse square root of a symmetric positive definite matrix.

    Computed from the symmetric eigendecomposition, mapping each eigenvalue
    ``w`` to ``w ** -0.5``. Eigenvalues ``<= tol`` raise
    :class:`SingularityError` rather than being clamped.
    """
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix must be square, got {a.shape}")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    if w[0] <= tol:
        raise SingularityError(
            f"matrix is singular: smallest eigenvalue {w[0]:.3e} <= {tol:.0e}", eigenvalue=float(w[0])
        )
    b = (v * w ** -0.5) @ v.T
    return 0.5 * (b + b.T)
