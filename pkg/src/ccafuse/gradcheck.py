"""Central finite-difference checks for the correlation loss and the fusion net."""
import numpy as np

from .corr import corr_loss, corr_loss_grad
from .linalg import DEFAULT_EPS

DEFAULT_SIZES = (8, 16, 64)
DEFAULT_KS = (1, 2, 3)
THRESHOLD = 1e-4


def numeric_grad(f, x, step=1e-3):
    """Fourth-order central-difference gradient of scalar ``f`` at ``x``.

    Uses the five-point stencil ``(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h``.
    ``x`` is perturbed in place and restored. The higher order lets ``h``
    stay large enough that round-off in ``f`` does not swamp small entries.
    """
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        vals = []
        for s in (2.0, 1.0, -1.0, -2.0):
            flat[i] = orig + s * step
            vals.append(f(x))
        flat[i] = orig
        gflat[i] = (-vals[0] + 8.0 * vals[1] - 8.0 * vals[2] + vals[3]) / (12.0 * step)
    return g


def random_batch(rng, n, k, coupling=0.6):
    """A pair of correlated ``n x k`` batches with distinct canonical correlations."""
    x = rng.normal(size=(n, k))
    mix = rng.normal(size=(k, k))
    y = coupling * x @ mix + rng.normal(size=(n, k))
    return x, y


def corr_gradcheck(n_batches=100, seed=0, sizes=DEFAULT_SIZES, ks=DEFAULT_KS, reg_epsilon=DEFAULT_EPS, step=1e-3, floor=1e-8):
    """Worst elementwise relative error of the analytic correlation-loss gradient.

    Batch ``i`` has ``sizes[i % len(sizes)]`` rows and
    ``ks[(i // len(sizes)) % len(ks)]`` columns; errors are
    ``|a - b| / max(|a|, |b|, floor)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_batches):
        n = sizes[i % len(sizes)]
        k = ks[(i // len(sizes)) % len(ks)]
        x, y = random_batch(rng, n, k)
        gx, gy = corr_loss_grad(x, y, reg_epsilon)
        fx = numeric_grad(lambda v: corr_loss(v, y, reg_epsilon)[0], x.copy(), step)
        fy = numeric_grad(lambda v: corr_loss(x, v, reg_epsilon)[0], y.copy(), step)
        for a, b in ((gx, fx), (gy, fy)):
            err = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
            worst = max(worst, float(err.max()))
    return worst
