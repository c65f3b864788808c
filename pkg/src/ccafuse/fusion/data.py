"""Synthetic two-view datasets and view corruption."""
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ParameterError


@dataclass(frozen=True)
class TwoViewDataset:
    view_a: np.ndarray
    view_b: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = len(self.labels)
        if self.view_a.shape[0] != n or self.view_b.shape[0] != n:
            raise DimensionError(
                f"sample counts differ: view_a {self.view_a.shape[0]}, view_b {self.view_b.shape[0]}, labels {n}"
            )
        if n and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ParameterError(f"labels must lie in [0, {self.n_classes})")

    @property
    def n(self):
        return len(self.labels)

    @property
    def is_matrix(self):
        return self.view_a.ndim == 3

    def subset(self, idx):
        return TwoViewDataset(self.view_a[idx], self.view_b[idx], self.labels[idx], self.n_classes)


def _class_centers(rng, n_classes, latent_dim, class_sep):
    if n_classes <= latent_dim:
        q, _ = np.linalg.qr(rng.normal(size=(latent_dim, latent_dim)))
        return class_sep * q[:n_classes]
    c = rng.normal(size=(n_classes, latent_dim))
    return class_sep * c / np.linalg.norm(c, axis=1, keepdims=True)


def _scaled_orthonormal(rng, dim, latent_dim):
    # orthonormal columns times sqrt(dim / latent_dim): P^T P = (dim / latent_dim) I
    q, _ = np.linalg.qr(rng.normal(size=(dim, latent_dim)))
    return q * np.sqrt(dim / latent_dim)


def _labels(rng, n, n_classes):
    return rng.permutation(np.arange(n) % n_classes)


def make_synthetic_twoview(
    n,
    latent_dim,
    n_classes,
    noise_a,
    noise_b,
    seed,
    dim_a=16,
    dim_b=16,
    class_sep=2.0,
    within_std=0.5,
):
    """Two noisy linear views of a class-conditional shared latent.

    ``z = center[label] + within_std * g`` with centers at distance
    ``class_sep`` from the origin (orthogonal when ``n_classes <=
    latent_dim``). Each view is ``z @ P.T + noise * g`` for a fixed random
    map ``P`` with orthogonal columns of squared norm ``dim / latent_dim``,
    so the population canonical correlations have a closed form (see
    :func:`population_correlations`). Labels are balanced.
    """
    if n < n_classes or n_classes < 1 or latent_dim < 1:
        raise ParameterError(f"invalid counts: n={n}, latent_dim={latent_dim}, n_classes={n_classes}")
    if min(dim_a, dim_b) < latent_dim:
        raise ParameterError(f"view dimensions {dim_a}, {dim_b} must be >= latent_dim={latent_dim}")
    if noise_a < 0 or noise_b < 0:
        raise ParameterError("noise levels must be >= 0")
    rng = np.random.default_rng(seed)
    centers = _class_centers(rng, n_classes, latent_dim, class_sep)
    p_a = _scaled_orthonormal(rng, dim_a, latent_dim)
    p_b = _scaled_orthonormal(rng, dim_b, latent_dim)
    labels = _labels(rng, n, n_classes)
    z = centers[labels] + within_std * rng.normal(size=(n, latent_dim))
    a = z @ p_a.T + noise_a * rng.normal(size=(n, dim_a))
    b = z @ p_b.T + noise_b * rng.normal(size=(n, dim_b))
    return TwoViewDataset(a, b, labels, n_classes)


def population_correlations(latent_cov, noise_a, noise_b, dim_a=16, dim_b=16):
    """Population canonical correlations of :func:`make_synthetic_twoview` views.

    With ``P^T P = g I`` each latent eigen-direction of variance ``lam``
    contributes ``rho^2 = g_a lam / (g_a lam + noise_a^2) * g_b lam / (g_b lam + noise_b^2)``.
    Returned in descending order, one per latent dimension.
    """
    lam = np.linalg.eigvalsh(np.asarray(latent_cov, dtype=np.float64))[::-1]
    r = lam.shape[0]
    ga, gb = dim_a / r, dim_b / r
    sa, sb = ga * lam, gb * lam
    with np.errstate(invalid="ignore", divide="ignore"):
        rho2 = np.where(lam > 0, sa / (sa + noise_a**2) * sb / (sb + noise_b**2), 0.0)
    return np.sqrt(rho2)


def make_synthetic_twoview_2d(
    n,
    latent_shape,
    n_classes,
    noise_a,
    noise_b,
    seed,
    shape_a=(8, 8),
    shape_b=(8, 8),
    class_sep=3.0,
    within_std=0.5,
):
    """Matrix-valued analogue: ``X_t = A S_t B^T + noise``, ``Y_t = C S_t E^T + noise``.

    ``S_t`` is a ``latent_shape`` matrix drawn around a per-class center.
    """
    p, q = latent_shape
    if n < n_classes or n_classes < 1 or p < 1 or q < 1:
        raise ParameterError(f"invalid counts: n={n}, latent_shape={latent_shape}, n_classes={n_classes}")
    if noise_a < 0 or noise_b < 0:
        raise ParameterError("noise levels must be >= 0")
    rng = np.random.default_rng(seed)
    centers = _class_centers(rng, n_classes, p * q, class_sep).reshape(n_classes, p, q)
    left_a = rng.normal(size=(shape_a[0], p)) / np.sqrt(p)
    right_a = rng.normal(size=(shape_a[1], q)) / np.sqrt(q)
    left_b = rng.normal(size=(shape_b[0], p)) / np.sqrt(p)
    right_b = rng.normal(size=(shape_b[1], q)) / np.sqrt(q)
    labels = _labels(rng, n, n_classes)
    s = centers[labels] + within_std * rng.normal(size=(n, p, q))
    a = left_a @ s @ right_a.T + noise_a * rng.normal(size=(n, *shape_a))
    b = left_b @ s @ right_b.T + noise_b * rng.normal(size=(n, *shape_b))
    return TwoViewDataset(a, b, labels, n_classes)


def corrupt_view(dataset, view, noise_sigma, seed):
    """Copy of ``dataset`` with seeded Gaussian noise added to one view."""
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if view not in ("A", "B", "a", "b"):
        raise ParameterError(f"view must be 'A' or 'B', got {view!r}")
    rng = np.random.default_rng(seed)
    if view in ("A", "a"):
        noisy = dataset.view_a + noise_sigma * rng.normal(size=dataset.view_a.shape)
        return TwoViewDataset(noisy, dataset.view_b, dataset.labels, dataset.n_classes)
    noisy = dataset.view_b + noise_sigma * rng.normal(size=dataset.view_b.shape)
    return TwoViewDataset(dataset.view_a, noisy, dataset.labels, dataset.n_classes)
