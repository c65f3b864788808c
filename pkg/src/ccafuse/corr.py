"""Total-correlation loss for batch training and its analytic gradient.

The loss is minus the sum of canonical correlations between two batches of
projected features (the nuclear norm of the whitened cross-covariance).
Batch means are removed internally, so callers pass raw projections.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularityError
from .linalg import DEFAULT_EPS, as_matrix, center_columns, covariance, inv_sqrt_sym


@dataclass(frozen=True)
class CorrGradWorkspace:
    t_matrix: np.ndarray
    u_tilde: np.ndarray
    v_tilde: np.ndarray
    d: np.ndarray
    delta11: np.ndarray
    delta12: np.ndarray
    delta22: np.ndarray
    xc: np.ndarray
    yc: np.ndarray
    n_samples: int


def _check_batch(xp, yp, reg_epsilon):
    xp = as_matrix(xp, "xp")
    yp = as_matrix(yp, "yp")
    if xp.shape[0] != yp.shape[0]:
        raise DimensionError(f"batch sizes differ: {xp.shape[0]} vs {yp.shape[0]}")
    n = xp.shape[0]
    k = max(xp.shape[1], yp.shape[1])
    if reg_epsilon == 0 and n < k + 2:
        raise SingularityError(f"batch of {n} samples is too small for {k} components without regularization")
    return xp, yp


def correlation_terms(sxx, syy, sxy):
    """Whitened cross-covariance, its SVD and the loss derivatives.

    Returns ``(t, u, d, vt, delta11, delta12, delta22)`` where ``d`` holds
    the canonical correlations and the deltas are the derivatives of
    ``sum(d)`` with respect to ``sxx``, ``sxy`` and ``syy``.
    """
    w11 = inv_sqrt_sym(sxx)
    w22 = inv_sqrt_sym(syy)
    t = w11 @ sxy @ w22
    u, d, vt = np.linalg.svd(t, full_matrices=False)
    # Delta12 carries no -1/2 factor; the finite-difference check rules that variant out.
    delta12 = w11 @ u @ vt @ w22
    delta11 = -0.5 * w11 @ (u * d) @ u.T @ w11
    delta22 = -0.5 * w22 @ (vt.T * d) @ vt @ w22
    return t, u, d, vt, 0.5 * (delta11 + delta11.T), delta12, 0.5 * (delta22 + delta22.T)


def corr_loss(xp, yp, reg_epsilon=DEFAULT_EPS):
    """Return ``(loss, workspace)`` with ``loss = -sum(singular values of T)``."""
    xp, yp = _check_batch(xp, yp, reg_epsilon)
    xc, _ = center_columns(xp)
    yc, _ = center_columns(yp)
    cov = covariance(xc, yc, reg_epsilon)
    t, u, d, vt, delta11, delta12, delta22 = correlation_terms(cov.sxx, cov.syy, cov.sxy)
    ws = CorrGradWorkspace(
        t_matrix=t,
        u_tilde=u,
        v_tilde=vt.T,
        d=d,
        delta11=delta11,
        delta12=delta12,
        delta22=delta22,
        xc=xc,
        yc=yc,
        n_samples=xp.shape[0],
    )
    return -float(d.sum()), ws


def grad_from_workspace(ws):
    """Gradients of the loss with respect to the raw projections, ``(gx, gy)``."""
    scale = -1.0 / (ws.n_samples - 1)
    gx = scale * (2.0 * ws.xc @ ws.delta11 + ws.yc @ ws.delta12.T)
    gy = scale * (2.0 * ws.yc @ ws.delta22 + ws.xc @ ws.delta12)
    return gx, gy


def corr_loss_grad(xp, yp, reg_epsilon=DEFAULT_EPS):
    """Analytic gradient of :func:`corr_loss`; returns ``(gx, gy)``, shaped like the inputs."""
    _, ws = corr_loss(xp, yp, reg_epsilon)
    return grad_from_workspace(ws)
