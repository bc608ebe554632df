# cython: language_level=3
"""Compiled kernels; semantics mirror `pure.py` exactly.

Keep both implementations in lockstep: the test suite asserts equal
outputs on randomized inputs and the benchmark compares their speed.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef long long _NEG = -(<long long>1 << 62)


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU of two (N,4) / (M,4) arrays of [x_min,y_min,x_max,y_max]."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(
        np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(
        np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, area_a, ix1, iy1, ix2, iy2, iw, ih, inter, union
    for i in range(n):
        ax1 = a[i, 0]; ay1 = a[i, 1]; ax2 = a[i, 2]; ay2 = a[i, 3]
        area_a = (ax2 - ax1) * (ay2 - ay1)
        for j in range(m):
            ix1 = ax1 if ax1 > b[j, 0] else b[j, 0]
            iy1 = ay1 if ay1 > b[j, 1] else b[j, 1]
            ix2 = ax2 if ax2 < b[j, 2] else b[j, 2]
            iy2 = ay2 if ay2 < b[j, 3] else b[j, 3]
            iw = ix2 - ix1
            ih = iy2 - iy1
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            union = area_a + (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1]) - inter
            if union > 0.0:
                out[i, j] = inter / union
    return out


def greedy_assign(ious, scan_order, gt_ignore, double threshold):
    """COCO-style greedy assignment; see the pure backend for semantics."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] iou = np.ascontiguousarray(
        np.asarray(ious, dtype=np.float64))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.ascontiguousarray(
        np.asarray(scan_order, dtype=np.int64))
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ignore = np.ascontiguousarray(
        np.asarray(gt_ignore, dtype=np.uint8))
    cdef Py_ssize_t n_det = iou.shape[0], n_gt = iou.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] det_match = np.full(n_det, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] det_ignore = np.zeros(n_det, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] gt_taken = np.zeros(n_gt, dtype=np.uint8)
    cdef double thr = threshold if threshold < (1.0 - 1e-10) else (1.0 - 1e-10)
    cdef Py_ssize_t d, k
    cdef long long g, best
    cdef double best_iou
    for d in range(n_det):
        best = -1
        best_iou = thr
        for k in range(order.shape[0]):
            g = order[k]
            if gt_taken[g]:
                continue
            if best > -1 and ignore[best] == 0 and ignore[g] == 1:
                break
            if iou[d, g] < best_iou:
                continue
            best_iou = iou[d, g]
            best = g
        if best == -1:
            continue
        det_match[d] = best
        det_ignore[d] = ignore[best]
        gt_taken[best] = 1
    return det_match, det_ignore


def max_value_matching(values):
    """Maximum-total-value bipartite matching via successive longest paths."""
    cdef cnp.ndarray[cnp.int64_t, ndim=2] v = np.ascontiguousarray(
        np.asarray(values, dtype=np.int64))
    cdef Py_ssize_t n_gt = v.shape[0], n_pred = v.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] match_g = np.full(n_gt, -1, dtype=np.int64)
    if n_gt == 0 or n_pred == 0:
        return match_g
    cdef cnp.ndarray[cnp.int64_t, ndim=1] match_p = np.full(n_pred, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dist = np.empty(n_pred, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] origin = np.empty(n_pred, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev_p = np.empty(n_pred, dtype=np.int64)
    cdef Py_ssize_t p, p2, g, rounds
    cdef long long g2, base, nd, best_gain, best_p, pp, cur
    cdef bint improved
    while True:
        for p in range(n_pred):
            dist[p] = _NEG
            origin[p] = -1
            prev_p[p] = -1
        for p in range(n_pred):
            for g in range(n_gt):
                if match_g[g] == -1 and v[g, p] >= 0 and v[g, p] > dist[p]:
                    dist[p] = v[g, p]
                    origin[p] = g
        for rounds in range(n_pred):
            improved = False
            for p in range(n_pred):
                if dist[p] == _NEG or match_p[p] == -1:
                    continue
                g2 = match_p[p]
                base = dist[p] - v[g2, p]
                for p2 in range(n_pred):
                    if p2 == p or v[g2, p2] < 0:
                        continue
                    nd = base + v[g2, p2]
                    if nd > dist[p2]:
                        dist[p2] = nd
                        prev_p[p2] = p
                        origin[p2] = -1
                        improved = True
            if not improved:
                break
        best_p = -1
        best_gain = 0
        for p in range(n_pred):
            if match_p[p] == -1 and dist[p] != _NEG and dist[p] > best_gain:
                best_gain = dist[p]
                best_p = p
        if best_p == -1:
            return match_g
        cur = best_p
        while True:
            if prev_p[cur] == -1:
                g2 = origin[cur]
                match_p[cur] = g2
                match_g[g2] = cur
                break
            pp = prev_p[cur]
            g2 = match_p[pp]
            match_p[cur] = g2
            match_g[g2] = cur
            cur = pp
