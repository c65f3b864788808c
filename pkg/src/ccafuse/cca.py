"""Closed-form linear CCA between two views."""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, ParameterError
from .linalg import DEFAULT_EPS, as_matrix, center_columns, covariance, inv_sqrt_sym


@dataclass(frozen=True)
class CcaModel:
    """Fitted CCA transforms.

    ``u`` is ``dx x k`` and ``v`` is ``dy x k``; canonical variables are
    ``(x - mean_x) @ u`` and ``(y - mean_y) @ v``.
    """

    u: np.ndarray
    v: np.ndarray
    correlations: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    reg_epsilon: float

    @property
    def k(self):
        return self.u.shape[1]


def fix_signs(u, v):
    """Flip column pairs so the largest-magnitude entry of each ``u`` column is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return u * signs, v * signs


def solve_cca(sxx, syy, sxy, k):
    """Top-``k`` canonical directions from precomputed covariances.

    Forms ``T = sxx^-1/2 sxy syy^-1/2`` and takes its SVD; the directions are
    the whitened singular vectors. Returns ``(u, v, correlations)``.
    """
    wx = inv_sqrt_sym(sxx)
    wy = inv_sqrt_sym(syy)
    t = wx @ sxy @ wy
    lu, s, rvt = np.linalg.svd(t, full_matrices=False)
    u = wx @ lu[:, :k]
    v = wy @ rvt[:k].T
    u, v = fix_signs(u, v)
    return u, v, s[:k].copy()


def fit_cca(x, y, k=1, reg_epsilon=DEFAULT_EPS):
    """Fit the ``k`` leading canonical pairs of views ``x`` (N x dx) and ``y`` (N x dy).

    Raises
    ------
    ParameterError
        ``k`` is not in ``[1, min(dx, dy)]``.
    SingularityError
        An auto-covariance is singular (possible only with ``reg_epsilon=0``).
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"views have different sample counts: {x.shape[0]} vs {y.shape[0]}")
    if not 1 <= k <= min(x.shape[1], y.shape[1]):
        raise ParameterError(f"k={k} out of range [1, {min(x.shape[1], y.shape[1])}]")
    xc, mx = center_columns(x)
    yc, my = center_columns(y)
    cov = covariance(xc, yc, reg_epsilon)
    u, v, corr = solve_cca(cov.sxx, cov.syy, cov.sxy, k)
    return CcaModel(u, v, corr, mx, my, float(reg_epsilon))


def project(model, x, y):
    """Map both views to canonical variables; returns ``(xp, yp)``, each N x k."""
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != model.u.shape[0]:
        raise DimensionError(f"x has {x.shape[1]} columns, model expects {model.u.shape[0]}")
    if y.shape[1] != model.v.shape[0]:
        raise DimensionError(f"y has {y.shape[1]} columns, model expects {model.v.shape[0]}")
    return (x - model.mean_x) @ model.u, (y - model.mean_y) @ model.v


def canonical_correlation(xp, yp):
    """Pearson correlation of two projected columns."""
    a = np.asarray(xp, dtype=np.float64).ravel()
    b = np.asarray(yp, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise DegenerateInputError("need at least 2 values")
    a = a - a.mean()
    b = b - b.mean()
    saa = a @ a
    sbb = b @ b
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateInputError("zero variance in a projected column")
    r = (a @ b) / np.sqrt(saa * sbb)
    return float(np.clip(r, -1.0, 1.0))
