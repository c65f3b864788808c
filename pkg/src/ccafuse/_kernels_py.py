"""Pure-Python/NumPy versions of the compiled kernels.

Same signatures and results as ``_kernels.pyx``; used when the extension is
not built or ``CCAFUSE_PURE_PYTHON=1``.
"""
import numpy as np


def box_mean(img, win):
    """Mean over every fully contained ``win x win`` window (valid region)."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    s = np.zeros((h + 1, w + 1))
    s[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    tot = s[win:, win:] - s[:-win, win:] - s[win:, :-win] + s[:-win, :-win]
    return tot / (win * win)


def iou_matrix(a, b):
    """Pairwise IoU of ``(n, 4)`` and ``(m, 4)`` boxes as ``x1, y1, x2, y2``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def greedy_match(iou, order, threshold):
    """Greedy one-to-one matching.

    Predictions are visited in ``order``; each takes the unmatched ground
    truth with the highest IoU (lowest index on ties) if it reaches
    ``threshold``. Entries below zero mark forbidden pairs. Returns an int
    array mapping prediction index to ground-truth index or -1.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n_pred, n_gt = iou.shape
    taken = [False] * n_gt
    out = np.full(n_pred, -1, dtype=np.int64)
    for p in order:
        best, best_j = -1.0, -1
        row = iou[p]
        for j in range(n_gt):
            if not taken[j] and row[j] >= threshold and row[j] > best:
                best, best_j = row[j], j
        if best_j >= 0:
            taken[best_j] = True
            out[p] = best_j
    return out
