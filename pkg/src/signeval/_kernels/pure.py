"""Pure NumPy/Python kernels; interchangeable with the compiled module.

These are the hot inner loops of evaluation: pairwise IoU matrices,
confidence-ordered greedy box assignment, and bipartite matching by
successive augmenting paths. Semantics must stay bit-identical to
`_fast.pyx`; the test suite cross-checks both backends.
"""

from __future__ import annotations

import numpy as np

_NEG = -(1 << 62)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two (N,4) / (M,4) arrays of [x_min,y_min,x_max,y_max]."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0.0, inter / union, 0.0)
    return iou


def greedy_assign(
    ious: np.ndarray,
    scan_order: np.ndarray,
    gt_ignore: np.ndarray,
    threshold: float,
) -> tuple[np.ndarray, np.ndarray]:
    """COCO-style greedy assignment of detections to ground-truth boxes.

    `ious` is (D, G) with detections already in descending-confidence
    order. Ground truth is scanned in `scan_order`; each detection takes
    the unmatched box of highest IoU at or above `threshold`, may fall
    back to an ignored box only while no regular box has been taken, and
    inherits the ignore flag of whatever it matched.

    Returns (det_match, det_ignore): matched gt index per detection (or
    -1) and the inherited ignore flags.
    """
    ious = np.asarray(ious, dtype=np.float64)
    scan_order = np.asarray(scan_order, dtype=np.int64)
    gt_ignore = np.asarray(gt_ignore, dtype=np.uint8)
    n_det, n_gt = ious.shape
    det_match = np.full(n_det, -1, dtype=np.int64)
    det_ignore = np.zeros(n_det, dtype=np.uint8)
    gt_taken = np.zeros(n_gt, dtype=np.uint8)
    thr = min(threshold, 1.0 - 1e-10)
    for d in range(n_det):
        best = -1
        best_iou = thr
        for g in scan_order:
            if gt_taken[g]:
                continue
            if best > -1 and not gt_ignore[best] and gt_ignore[g]:
                break  # a regular match exists; do not trade it for an ignored box
            if ious[d, g] < best_iou:
                continue
            best_iou = ious[d, g]
            best = g
        if best == -1:
            continue
        det_match[d] = best
        det_ignore[d] = gt_ignore[best]
        gt_taken[best] = 1
    return det_match, det_ignore


def max_value_matching(values: np.ndarray) -> np.ndarray:
    """Maximum-total-value one-to-one matching on a dense bipartite graph.

    `values` is (G, P) int64; negative entries are inadmissible. Built by
    successive augmenting paths, each chosen to maximize total gain, so
    with composite values (base + secondary weight) the result is the
    maximum-cardinality matching of maximum secondary weight.

    Returns the matched pred index per gt row, -1 for unmatched.
    """
    v = np.asarray(values, dtype=np.int64)
    n_gt, n_pred = v.shape
    match_g = np.full(n_gt, -1, dtype=np.int64)
    match_p = np.full(n_pred, -1, dtype=np.int64)
    if n_gt == 0 or n_pred == 0:
        return match_g
    while True:
        dist = [_NEG] * n_pred
        origin = [-1] * n_pred  # free gt reaching p directly
        prev_p = [-1] * n_pred  # previous pred on the alternating path
        for p in range(n_pred):
            for g in range(n_gt):
                if match_g[g] == -1 and v[g, p] >= 0 and v[g, p] > dist[p]:
                    dist[p] = v[g, p]
                    origin[p] = g
        for _ in range(n_pred):
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
        p = best_p
        while True:
            if prev_p[p] == -1:
                g = origin[p]
                match_p[p] = g
                match_g[g] = p
                break
            pp = prev_p[p]
            g = match_p[pp]
            match_p[p] = g
            match_g[g] = p
            p = pp
