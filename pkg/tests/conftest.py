"""Shared independent oracles for the test suite.

Each oracle recomputes an expected value through a route the implementation
does not use: grid counting for areas, exhaustive permutations for
assignment, a recall-level sweep for AP, closed-form scalar Kalman algebra.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from tad.geometry import BoundingBox, overlap_area_ratio

GRID_STEP = 0.25  # oracle boxes snap to this grid so cell counting is exact


def snapped_box(rng: np.random.Generator, lo: float = 0.0, hi: float = 32.0) -> BoundingBox:
    """Random box with all coordinates on the counting grid."""
    steps = int((hi - lo) / GRID_STEP)
    while True:
        xs = np.sort(rng.integers(0, steps + 1, size=2))
        ys = np.sort(rng.integers(0, steps + 1, size=2))
        if xs[0] < xs[1] and ys[0] < ys[1]:
            return BoundingBox(
                lo + xs[0] * GRID_STEP,
                lo + ys[0] * GRID_STEP,
                lo + xs[1] * GRID_STEP,
                lo + ys[1] * GRID_STEP,
            )


def _cell_mask(box: BoundingBox, lo: float, hi: float) -> np.ndarray:
    """Boolean grid of GRID_STEP cells whose centers fall inside the box."""
    centers = np.arange(lo + GRID_STEP / 2, hi, GRID_STEP)
    inside_x = (centers > box.x_min) & (centers < box.x_max)
    inside_y = (centers > box.y_min) & (centers < box.y_max)
    return np.outer(inside_y, inside_x)


def counted_area(box: BoundingBox, lo: float = 0.0, hi: float = 32.0) -> float:
    return float(_cell_mask(box, lo, hi).sum()) * GRID_STEP * GRID_STEP


def counted_iou(a: BoundingBox, b: BoundingBox, lo: float = 0.0, hi: float = 32.0) -> float:
    ma, mb = _cell_mask(a, lo, hi), _cell_mask(b, lo, hi)
    inter = float((ma & mb).sum())
    union = float((ma | mb).sum())
    return inter / union if union else 0.0


def counted_line_ratio(prev_lo: float, prev_hi: float, curr_lo: float, curr_hi: float) -> float:
    """1-D cell counting: fraction of prev's cells covered by curr."""
    centers = np.arange(prev_lo + GRID_STEP / 2, prev_hi, GRID_STEP)
    prev_cells = len(centers)
    covered = int(((centers > curr_lo) & (centers < curr_hi)).sum())
    return covered / prev_cells if prev_cells else 0.0


def brute_force_assignment_total(iou: np.ndarray, threshold: float) -> float:
    """Max total IoU over all one-to-one assignments, sub-threshold pairs
    contributing nothing."""
    scores = np.where(iou >= threshold, iou, 0.0)
    n_rows, n_cols = scores.shape
    if n_rows <= n_cols:
        best = 0.0
        for perm in permutations(range(n_cols), n_rows):
            best = max(best, sum(scores[i, j] for i, j in enumerate(perm)))
        return best
    best = 0.0
    for perm in permutations(range(n_rows), n_cols):
        best = max(best, sum(scores[i, j] for j, i in enumerate(perm)))
    return best


_PERM_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _perm_matrix(k: int, n: int) -> np.ndarray:
    """All k-permutations of range(n), one per row."""
    key = (k, n)
    if key not in _PERM_CACHE:
        _PERM_CACHE[key] = np.array(list(permutations(range(n), k)), dtype=np.intp)
    return _PERM_CACHE[key]


def brute_force_assignment_total_fast(iou: np.ndarray, threshold: float) -> float:
    """Vectorized exhaustive-permutation optimum (same semantics as above)."""
    scores = np.where(iou >= threshold, iou, 0.0)
    n_rows, n_cols = scores.shape
    if n_rows > n_cols:
        scores = scores.T
        n_rows, n_cols = n_cols, n_rows
    perms = _perm_matrix(n_rows, n_cols)  # (P, n_rows) column choices
    rows = np.arange(n_rows)
    totals = scores[rows[None, :], perms].sum(axis=1)
    return float(totals.max())


def recall_sweep_ap(tp_flags: list[bool], n_truth: int) -> float:
    """All-point interpolated AP recomputed as a sweep over recall levels:
    AP = (1/n_truth) * sum over i=1..n_truth of max precision at recall >= i/n_truth.
    """
    tp = fp = 0
    points = []  # (recall, precision) at each rank
    for flag in tp_flags:
        tp += int(flag)
        fp += int(not flag)
        points.append((tp / n_truth, tp / (tp + fp)))
    total = 0.0
    for i in range(1, n_truth + 1):
        level = i / n_truth
        attained = [p for r, p in points if r >= level - 1e-12]
        total += max(attained) if attained else 0.0
    return total / n_truth


def greedy_match_flags(detections, truth_frames, object_class, iou_threshold: float):
    """Plainly coded confidence-descending one-to-one matching (AP oracle side)."""
    truth = {}
    n_truth = 0
    for frame in truth_frames:
        boxes = [box for box, cls in frame.objects if cls is object_class]
        truth[(frame.channel_id, frame.frame_index)] = [[box, False] for box in boxes]
        n_truth += len(boxes)
    flags = []
    dets = [d for d in detections if d.object_class is object_class]
    for det in sorted(dets, key=lambda d: -d.confidence):
        candidates = truth.get((det.channel_id, det.frame_index), [])
        best, best_iou = None, 0.0
        for slot in candidates:
            if slot[1]:
                continue
            iou = overlap_area_ratio(det.box, slot[0])
            if iou > best_iou:
                best, best_iou = slot, iou
        if best is not None and best_iou >= iou_threshold:
            best[1] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, n_truth


def scalar_kalman_update(x: float, p: float, z: float, r: float) -> tuple[float, float]:
    """Closed-form 1-D Kalman measurement update."""
    gain = p / (p + r)
    return x + gain * (z - x), (1.0 - gain) * p
