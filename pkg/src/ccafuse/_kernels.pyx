# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: SSIM window sums, box IoU, greedy matching."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def box_mean(img, Py_ssize_t win):
    cdef double[:, ::1] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t oh = h - win + 1, ow = w - win + 1
    out_arr = np.empty((oh, ow), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    # column sums over a sliding vertical strip, then a running horizontal sum
    cdef double[::1] col = np.zeros(w, dtype=np.float64)
    cdef Py_ssize_t i, j, r
    cdef double acc
    cdef double norm = 1.0 / (win * win)
    for j in range(w):
        acc = 0.0
        for r in range(win):
            acc += a[r, j]
        col[j] = acc
    for i in range(oh):
        if i > 0:
            for j in range(w):
                col[j] += a[i + win - 1, j] - a[i - 1, j]
        acc = 0.0
        for j in range(win):
            acc += col[j]
        out[i, 0] = acc * norm
        for j in range(1, ow):
            acc += col[j + win - 1] - col[j - 1]
            out[i, j] = acc * norm
    return out_arr


def iou_matrix(a, b):
    cdef double[:, ::1] pa = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] pb = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = pa.shape[0], m = pb.shape[0], i, j
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double iw, ih, inter, union, area_a, area_b
    for i in range(n):
        area_a = (pa[i, 2] - pa[i, 0]) * (pa[i, 3] - pa[i, 1])
        for j in range(m):
            iw = min(pa[i, 2], pb[j, 2]) - max(pa[i, 0], pb[j, 0])
            ih = min(pa[i, 3], pb[j, 3]) - max(pa[i, 1], pb[j, 1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            area_b = (pb[j, 2] - pb[j, 0]) * (pb[j, 3] - pb[j, 1])
            union = area_a + area_b - inter
            if union > 0.0:
                out[i, j] = inter / union
    return out_arr


def greedy_match(iou, order, double threshold):
    cdef double[:, ::1] m = np.ascontiguousarray(iou, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n_pred = m.shape[0], n_gt = m.shape[1], k, j, p, best_j
    cdef double best
    taken_arr = np.zeros(n_gt, dtype=np.uint8)
    cdef unsigned char[::1] taken = taken_arr
    out_arr = np.full(n_pred, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    for k in range(idx.shape[0]):
        p = idx[k]
        best = -1.0
        best_j = -1
        for j in range(n_gt):
            if not taken[j] and m[p, j] >= threshold and m[p, j] > best:
                best = m[p, j]
                best_j = j
        if best_j >= 0:
            taken[best_j] = 1
            out[p] = best_j
    return out_arr
