"""Two-dimensional CCA by alternating left/right solves.

Each sample is a matrix. With the right transforms fixed, the left transforms
solve an ordinary CCA problem on row-side covariances; then the roles swap.
The tracked objective is the sum of canonical correlations between the
vectorized ``d1 x d2`` projections of the two views. Its ridge is
``reg_epsilon`` isotropic input noise pushed through the transforms
(``kron(L'L, R'R)`` on the flattened projection), which makes the objective
invariant to rescaling ``L`` and ``R`` and, for one-column inputs, identical to
the regularized closed-form CCA problem.

For ``d1 = d2 = 1`` each half-step maximizes that objective exactly over its
block. For larger projections the half-step problems and the vectorized
objective differ, and a closed-form half-step can lower the objective. Such a
step is discarded and replaced by a backtracking gradient-ascent step on the
same block (the gradient comes from the correlation-loss machinery), which
never decreases the objective. ``fallback_steps`` counts those events.
"""
from dataclasses import dataclass, field

import numpy as np

from .cca import fix_signs, solve_cca
from .corr import correlation_terms
from .errors import DegenerateInputError, DimensionError, ParameterError
from .linalg import DEFAULT_EPS, center_columns, covariance

# closed-form steps may lose this much to rounding and still be kept
ACCEPT_SLACK = 1e-12


@dataclass(frozen=True)
class Cca2dModel:
    lx: np.ndarray
    rx: np.ndarray
    ly: np.ndarray
    ry: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    objective_trace: np.ndarray
    reg_epsilon: float
    converged: bool = True
    n_iter: int = 0
    fallback_steps: int = 0
    correlations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def d1(self):
        return self.lx.shape[1]

    @property
    def d2(self):
        return self.rx.shape[1]

    @property
    def objective(self):
        return float(self.objective_trace[-1])


def as_stack(xs, name="xs"):
    """Validate a stack of equally shaped matrices (``N x rows x cols``)."""
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 3:
        raise DimensionError(f"{name} must be a 3-D stack, got shape {a.shape}")
    if min(a.shape) < 1:
        raise DimensionError(f"{name} has an empty axis: {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DegenerateInputError(f"{name} contains NaN or Inf")
    return a


def _side_covariances(ax, ay, n, eps):
    # ax: N x m x d, one block of pseudo-samples per sample; sums over t and d
    m_x, m_y = ax.shape[1], ay.shape[1]
    cx = ax.transpose(1, 0, 2).reshape(m_x, -1)
    cy = ay.transpose(1, 0, 2).reshape(m_y, -1)
    sxx = cx @ cx.T / (n - 1)
    syy = cy @ cy.T / (n - 1)
    sxx = 0.5 * (sxx + sxx.T) + eps * np.eye(m_x)
    syy = 0.5 * (syy + syy.T) + eps * np.eye(m_y)
    sxy = cx @ cy.T / (n - 1)
    return sxx, syy, sxy


def _left_step(xc, yc, rx, ry, d1, eps):
    n = xc.shape[0]
    return solve_cca(*_side_covariances(xc @ rx, yc @ ry, n, eps), d1)


def _right_step(xc, yc, lx, ly, d2, eps):
    n = xc.shape[0]
    ax = np.einsum("tji,jk->tik", xc, lx)
    ay = np.einsum("tji,jk->tik", yc, ly)
    return solve_cca(*_side_covariances(ax, ay, n, eps), d2)


def _project(xc, l, r):
    return np.einsum("ji,tjk,kl->til", l, xc, r)


def _projected_covariances(px, py, kx, ky, eps):
    n = px.shape[0]
    a, _ = center_columns(px.reshape(n, -1))
    b, _ = center_columns(py.reshape(n, -1))
    cov = covariance(a, b, 0.0)
    return a, b, cov.sxx + eps * kx, cov.syy + eps * ky, cov.sxy


def ridge_kernel(l, r):
    """Covariance of the flattened projection of unit isotropic input noise, ``kron(L'L, R'R)``."""
    return np.kron(l.T @ l, r.T @ r)


def vectorized_correlations(px, py, reg_epsilon=DEFAULT_EPS, kx=None, ky=None):
    """Canonical correlations between flattened projection stacks.

    The ridge on each projected covariance is ``reg_epsilon * k`` with
    ``k`` defaulting to the identity. Passing :func:`ridge_kernel` of the
    transforms makes the ridge the image of ``reg_epsilon`` isotropic input
    noise, so the result does not change when ``L`` or ``R`` is rescaled.
    """
    n = px.shape[0]
    q = px.reshape(n, -1).shape[1]
    kx = np.eye(q) if kx is None else kx
    ky = np.eye(py.reshape(n, -1).shape[1]) if ky is None else ky
    _, _, sxx, syy, sxy = _projected_covariances(px, py, kx, ky, reg_epsilon)
    return correlation_terms(sxx, syy, sxy)[2]


def model_correlations(model, xs, ys):
    """Canonical correlations of ``xs``/``ys`` projected through ``model``, with its ridge."""
    px = project_2d(model, xs, "x")
    py = project_2d(model, ys, "y")
    return vectorized_correlations(
        px, py, model.reg_epsilon, ridge_kernel(model.lx, model.rx), ridge_kernel(model.ly, model.ry)
    )


def _objective(xc, yc, lx, rx, ly, ry, eps):
    px = _project(xc, lx, rx)
    py = _project(yc, ly, ry)
    c = vectorized_correlations(px, py, eps, ridge_kernel(lx, rx), ridge_kernel(ly, ry))
    return float(c.sum()), c


def _ridge_grads(delta, l, r, eps):
    # d tr(delta kron(L'L, R'R)) split into the L and R factors
    d1, d2 = l.shape[1], r.shape[1]
    d4 = (eps * delta).reshape(d1, d2, d1, d2)
    ga = np.einsum("ilpq,ql->pi", d4, r.T @ r)
    gb = np.einsum("ilpq,pi->ql", d4, l.T @ l)
    return l @ (ga + ga.T), r @ (gb + gb.T)


def _objective_grad(xc, yc, lx, rx, ly, ry, eps):
    """Gradients of the objective w.r.t. ``(lx, ly)`` and ``(rx, ry)``."""
    px = _project(xc, lx, rx)
    py = _project(yc, ly, ry)
    n = px.shape[0]
    a, b, sxx, syy, sxy = _projected_covariances(px, py, ridge_kernel(lx, rx), ridge_kernel(ly, ry), eps)
    _, _, _, _, delta11, delta12, delta22 = correlation_terms(sxx, syy, sxy)
    gpx = ((2.0 * a @ delta11 + b @ delta12.T) / (n - 1)).reshape(px.shape)
    gpy = ((2.0 * b @ delta22 + a @ delta12) / (n - 1)).reshape(py.shape)
    rl_x, rr_x = _ridge_grads(delta11, lx, rx, eps)
    rl_y, rr_y = _ridge_grads(delta22, ly, ry, eps)
    d_lx = np.einsum("tjk,kl,til->ji", xc, rx, gpx) + rl_x
    d_ly = np.einsum("tjk,kl,til->ji", yc, ry, gpy) + rl_y
    d_rx = np.einsum("tjk,ji,til->kl", xc, lx, gpx) + rr_x
    d_ry = np.einsum("tjk,ji,til->kl", yc, ly, gpy) + rr_y
    return (d_lx, d_ly), (d_rx, d_ry)


def _ascent(evaluate, blocks, grads, obj, max_halvings=30, armijo=1e-4):
    gnorm2 = sum(float((g * g).sum()) for g in grads)
    bnorm = np.sqrt(sum(float((b * b).sum()) for b in blocks))
    if np.sqrt(gnorm2) * bnorm < 1e-10:
        return blocks, obj, None
    step = 0.5 * bnorm / np.sqrt(gnorm2)
    for _ in range(max_halvings):
        cand = tuple(b + step * g for b, g in zip(blocks, grads))
        value, corr = evaluate(cand)
        if value >= obj + armijo * step * gnorm2:
            return cand, value, corr
        step *= 0.5
    return blocks, obj, None


def _rebalance(l, r):
    """Move scale from ``R`` into ``L`` so ``||R||_F = sqrt(d2)``; the projection is unchanged."""
    c = np.linalg.norm(r) / np.sqrt(r.shape[1])
    return l * c, r / c


def _normalize(xc, l, r, eps):
    """Pin ``||R||_F = sqrt(d2)`` and unit mean regularized variance of the projected entries.

    The regularized variance of entry ``(i, j)`` is its sample variance plus
    the ridge ``eps * (L'L)_ii (R'R)_jj``. For one-column inputs this is the
    same scale as the whitening constraint of closed-form CCA.
    """
    l, r = _rebalance(l, r)
    p = _project(xc, l, r)
    var = float((p * p).sum()) / (xc.shape[0] - 1) + eps * float(np.trace(ridge_kernel(l, r)))
    return l / np.sqrt(var / (p.shape[1] * p.shape[2])), r


def _init_right(n_cols, d2, init, rng):
    if init == "identity":
        return np.eye(n_cols)[:, :d2].copy()
    if init == "uniform":
        return rng.uniform(-1.0, 1.0, size=(n_cols, d2))
    raise ParameterError(f"unknown init {init!r}; use 'identity' or 'uniform'")


def fit_2dcca(xs, ys, d1, d2, max_iters=100, tol=1e-7, reg_epsilon=DEFAULT_EPS, init="identity", seed=0):
    """Fit left/right transform pairs for two matrix-valued views.

    Parameters
    ----------
    xs, ys : array (N, m, n)
        Sample stacks for each view; both must have the same ``N``.
    d1, d2 : int
        Projected shape. ``d1 <= min(m_x, m_y)``, ``d2 <= min(n_x, n_y)``.
    max_iters : int
        Full (left + right) iterations. Hitting the limit sets
        ``converged=False``; it is not an error.
    tol : float
        Stop when the relative objective change over one full iteration
        falls below this.
    init : {'identity', 'uniform'}
        Right-transform start: first ``d2`` identity columns, or a seeded
        uniform draw on ``[-1, 1]``.

    Returns
    -------
    Cca2dModel
        ``objective_trace`` holds one entry per half-step and is
        non-decreasing.
    """
    xs = as_stack(xs, "xs")
    ys = as_stack(ys, "ys")
    n = xs.shape[0]
    if ys.shape[0] != n:
        raise DimensionError(f"stacks differ in sample count: {n} vs {ys.shape[0]}")
    if n < 2:
        raise DegenerateInputError("need at least 2 samples")
    _, m_x, n_x = xs.shape
    _, m_y, n_y = ys.shape
    if not 1 <= d1 <= min(m_x, m_y):
        raise ParameterError(f"d1={d1} out of range [1, {min(m_x, m_y)}]")
    if not 1 <= d2 <= min(n_x, n_y):
        raise ParameterError(f"d2={d2} out of range [1, {min(n_x, n_y)}]")
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")

    mean_x = xs.mean(axis=0)
    mean_y = ys.mean(axis=0)
    xc = xs - mean_x
    yc = ys - mean_y
    rng = np.random.default_rng(seed)
    rx = _init_right(n_x, d2, init, rng)
    ry = _init_right(n_y, d2, init, rng)
    rx = rx * (np.sqrt(d2) / np.linalg.norm(rx))
    ry = ry * (np.sqrt(d2) / np.linalg.norm(ry))

    trace = []
    fallbacks = 0
    lx, ly, _ = _left_step(xc, yc, rx, ry, d1, reg_epsilon)
    obj, corr = _objective(xc, yc, lx, rx, ly, ry, reg_epsilon)
    trace.append(obj)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        start = obj
        if it > 1:
            cand_lx, cand_ly, _ = _left_step(xc, yc, rx, ry, d1, reg_epsilon)
            cand, cand_corr = _objective(xc, yc, cand_lx, rx, cand_ly, ry, reg_epsilon)
            if cand >= obj - ACCEPT_SLACK:
                lx, ly, obj, corr = cand_lx, cand_ly, cand, cand_corr
            else:
                fallbacks += 1
                grads, _ = _objective_grad(xc, yc, lx, rx, ly, ry, reg_epsilon)
                (lx, ly), obj, new_corr = _ascent(
                    lambda c: _objective(xc, yc, c[0], rx, c[1], ry, reg_epsilon), (lx, ly), grads, obj
                )
                corr = corr if new_corr is None else new_corr
            trace.append(obj)
        cand_rx, cand_ry, _ = _right_step(xc, yc, lx, ly, d2, reg_epsilon)
        cand, cand_corr = _objective(xc, yc, lx, cand_rx, ly, cand_ry, reg_epsilon)
        if cand >= obj - ACCEPT_SLACK:
            rx, ry, obj, corr = cand_rx, cand_ry, cand, cand_corr
        else:
            fallbacks += 1
            _, grads = _objective_grad(xc, yc, lx, rx, ly, ry, reg_epsilon)
            (rx, ry), obj, new_corr = _ascent(
                lambda c: _objective(xc, yc, lx, c[0], ly, c[1], reg_epsilon), (rx, ry), grads, obj
            )
            corr = corr if new_corr is None else new_corr
        # keep R at a fixed scale so the next row-side ridge sees the same input scale
        lx, rx = _rebalance(lx, rx)
        ly, ry = _rebalance(ly, ry)
        trace.append(obj)
        if it > 1 and abs(obj - start) <= tol * max(abs(start), 1e-12):
            converged = True
            break

    lx, rx = _normalize(xc, lx, rx, reg_epsilon)
    ly, ry = _normalize(yc, ly, ry, reg_epsilon)
    lx, ly = fix_signs(lx, ly)
    rx, ry = fix_signs(rx, ry)
    return Cca2dModel(
        lx=lx,
        rx=rx,
        ly=ly,
        ry=ry,
        mean_x=mean_x,
        mean_y=mean_y,
        objective_trace=np.array(trace),
        reg_epsilon=float(reg_epsilon),
        converged=converged,
        n_iter=it,
        fallback_steps=fallbacks,
        correlations=corr,
    )


def project_2d(model, x, view="x"):
    """Project one matrix (or a stack) of the given view to ``d1 x d2``."""
    if view in ("x", "X", "a", "A"):
        l, r, mean = model.lx, model.rx, model.mean_x
    elif view in ("y", "Y", "b", "B"):
        l, r, mean = model.ly, model.ry, model.mean_y
    else:
        raise ParameterError(f"view must be 'x' or 'y', got {view!r}")
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-2:] != mean.shape:
        raise DimensionError(f"input shape {a.shape[-2:]} does not match view shape {mean.shape}")
    return l.T @ (a - mean) @ r
