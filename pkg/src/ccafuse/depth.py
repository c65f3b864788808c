"""Depth-map comparison losses: point-wise L1, gradient loss, SSIM, and their weighted sum."""
import numpy as np

from . import kernels
from .errors import DegenerateInputError, DimensionError, ParameterError

DEFAULT_LAMBDA = 0.1
DEFAULT_WINDOW = 7


def _pair(y, yhat):
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(yhat, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"depth images must be 2-D, got {a.shape} and {b.shape}")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < 2:
        raise DimensionError(f"depth images need at least 2x2 pixels, got {a.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DegenerateInputError("depth image contains NaN or Inf")
    return a, b


def l1_depth(y, yhat):
    """Mean absolute per-pixel difference."""
    a, b = _pair(y, yhat)
    return float(np.abs(a - b).mean())


def forward_gradients(img):
    """Forward differences along x (columns) and y (rows); last column/row is 0."""
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, :-1] = img[:, 1:] - img[:, :-1]
    gy[:-1, :] = img[1:, :] - img[:-1, :]
    return gx, gy


def grad_loss(y, yhat):
    """Mean over pixels of ``|dx y - dx yhat| + |dy y - dy yhat|``."""
    a, b = _pair(y, yhat)
    ax, ay = forward_gradients(a)
    bx, by = forward_gradients(b)
    return float((np.abs(ax - bx) + np.abs(ay - by)).mean())


def ssim_constants(data_range=1.0):
    return (0.01 * data_range) ** 2, (0.03 * data_range) ** 2


def ssim(y, yhat, window=DEFAULT_WINDOW, c1=None, c2=None, data_range=1.0):
    """Mean SSIM over all fully contained ``window x window`` uniform windows.

    Local statistics are population (divide by ``window**2``) moments.
    ``c1``/``c2`` default to ``(0.01 L)^2`` and ``(0.03 L)^2`` with
    ``L = data_range``.
    """
    a, b = _pair(y, yhat)
    if window < 3 or window % 2 == 0 or window > min(a.shape):
        raise ParameterError(f"window must be odd, >= 3 and <= {min(a.shape)}; got {window}")
    d1, d2 = ssim_constants(data_range)
    c1 = d1 if c1 is None else c1
    c2 = d2 if c2 is None else c2
    mu_a = kernels.box_mean(a, window)
    mu_b = kernels.box_mean(b, window)
    var_a = kernels.box_mean(a * a, window) - mu_a * mu_a
    var_b = kernels.box_mean(b * b, window) - mu_b * mu_b
    cov = kernels.box_mean(a * b, window) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def combined_depth_loss(y, yhat, lambda_w=DEFAULT_LAMBDA, window=DEFAULT_WINDOW, c1=None, c2=None, data_range=1.0):
    """``lambda_w * l1 + grad_loss + (1 - ssim) / 2``."""
    return (
        lambda_w * l1_depth(y, yhat)
        + grad_loss(y, yhat)
        + (1.0 - ssim(y, yhat, window, c1, c2, data_range)) / 2.0
    )


def depth_report(y, yhat, lambda_w=DEFAULT_LAMBDA, window=DEFAULT_WINDOW, c1=None, c2=None, data_range=1.0):
    """All four values as a dict, each computed once."""
    l1 = l1_depth(y, yhat)
    g = grad_loss(y, yhat)
    s = ssim(y, yhat, window, c1, c2, data_range)
    return {"l1": l1, "grad": g, "ssim": s, "combined": lambda_w * l1 + g + (1.0 - s) / 2.0}
