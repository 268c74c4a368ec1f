"""Ground-truth heatmap synthesis, heatmap loss, and the evaluation metric
suite: AUC, normalized L2 distance, minimum distance, and angular error."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigurationError, DegenerateGazeError, DimensionError,
                     UndefinedMetricError)

# Binarization threshold for ground-truth heatmaps: the one-sigma level set.
GT_BINARIZE_THRESHOLD = math.exp(-0.5)


def gaussian_heatmap(target: tuple[float, float], size: tuple[int, int] = (64, 64),
                     sigma: float = 3.0) -> np.ndarray:
    """Gaussian bump centered on a normalized target point.

    ``target`` is (x, y) in [0, 1]^2; the continuous peak sits at pixel
    (y * (H-1), x * (W-1)), so a target on a pixel center yields an exact
    value of 1.0 there.
    """
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    tx, ty = target
    h, w = size
    px = tx * (w - 1)
    py = ty * (h - 1)
    ys, xs = np.mgrid[0:h, 0:w]
    sq = (xs - px) ** 2 + (ys - py) ** 2
    return np.exp(-sq / (2.0 * sigma * sigma))


def mse_heatmap_loss(h: np.ndarray, h_hat: np.ndarray) -> float:
    """Sum of squared per-pixel differences between two heatmaps."""
    h = np.asarray(h, dtype=np.float64)
    h_hat = np.asarray(h_hat, dtype=np.float64)
    if h.shape != h_hat.shape:
        raise DimensionError(f"heatmap shapes differ: {h.shape} vs {h_hat.shape}")
    return float(np.sum((h - h_hat) ** 2))


def auc_score(pred: np.ndarray, gt_binary: np.ndarray) -> float:
    """ROC area of flattened prediction scores against a binary ground truth.

    Tied scores are collapsed into single ROC vertices, so the trapezoidal
    area equals the pairwise ranking probability P(s+ > s-) + 0.5 P(tie).
    """
    scores = np.asarray(pred, dtype=np.float64).ravel()
    labels = np.asarray(gt_binary, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise DimensionError(f"shapes differ: {pred.shape} vs {gt_binary.shape}")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order].astype(np.float64)
    tps = np.cumsum(y)
    fps = np.cumsum(1.0 - y)
    # one ROC vertex per distinct threshold value
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tpr = np.r_[0.0, tps[last_of_group] / n_pos]
    fpr = np.r_[0.0, fps[last_of_group] / n_neg]
    # clamp float summation residue so perfect separation reports exactly 1.0
    return float(min(max(np.trapezoid(tpr, fpr), 0.0), 1.0))


def l2_distance(pred_point: tuple[float, float], gt_point: tuple[float, float]) -> float:
    """Euclidean distance between two normalized image points."""
    return math.hypot(pred_point[0] - gt_point[0], pred_point[1] - gt_point[1])


def min_distance(pred_point: tuple[float, float],
                 gt_points: list[tuple[float, float]]) -> float:
    """Minimum L2 distance from the prediction to any annotated gaze point."""
    if not gt_points:
        raise ValueError("gt_points must be non-empty")
    return min(l2_distance(pred_point, g) for g in gt_points)


def angular_error(eye: tuple[float, float], pred_point: tuple[float, float],
                  gt_point: tuple[float, float]) -> float:
    """Angle in degrees between the predicted and ground-truth gaze vectors."""
    vp = (pred_point[0] - eye[0], pred_point[1] - eye[1])
    vg = (gt_point[0] - eye[0], gt_point[1] - eye[1])
    np_ = math.hypot(*vp)
    ng = math.hypot(*vg)
    if np_ == 0 or ng == 0:
        raise DegenerateGazeError("gaze vector has zero length")
    cos = (vp[0] * vg[0] + vp[1] * vg[1]) / (np_ * ng)
    cos = max(-1.0, min(1.0, cos))
    return math.degrees(math.acos(cos))


def heatmap_argmax(heatmap: np.ndarray) -> tuple[float, float]:
    """Normalized (x, y) of the heatmap maximum; ties go first in row-major order."""
    hm = np.asarray(heatmap)
    h, w = hm.shape
    idx = int(np.argmax(hm))
    row, col = divmod(idx, w)
    return (col / (w - 1) if w > 1 else 0.0,
            row / (h - 1) if h > 1 else 0.0)


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metric values over an evaluation run."""

    auc: float | None
    dist: float | None
    min_dist: float | None
    angular_deg: float | None
    n_samples: int
    n_skipped: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "dist": self.dist,
            "min_dist": self.min_dist,
            "angular_deg": self.angular_deg,
            "n_samples": self.n_samples,
            "n_skipped_per_metric": dict(self.n_skipped),
        }


def evaluate(records: list, sigma: float = 3.0) -> EvalReport:
    """Average per-record metrics over (prediction heatmap, annotation) pairs.

    Each record pairs a predicted heatmap with an annotation carrying a
    normalized eye point and 1..10 normalized gaze points.  The ground-truth
    point for AUC and Dist. is the annotator average; Min. Dist. runs against
    the individual annotations.  Records where a metric is undefined are
    excluded from that metric's mean and counted in the report.
    """
    if not records:
        raise ValueError("records must be non-empty")
    sums = {"auc": 0.0, "dist": 0.0, "min_dist": 0.0, "angular_deg": 0.0}
    counts = {k: 0 for k in sums}
    skipped = {k: 0 for k in sums}
    for pred, rec in records:
        pred = np.asarray(pred, dtype=np.float64)
        gaze_points = list(rec.gaze_points)
        gt_avg = (sum(p[0] for p in gaze_points) / len(gaze_points),
                  sum(p[1] for p in gaze_points) / len(gaze_points))
        pred_point = heatmap_argmax(pred)

        try:
            gt_heat = gaussian_heatmap(gt_avg, pred.shape, sigma)
            sums["auc"] += auc_score(pred, gt_heat >= GT_BINARIZE_THRESHOLD)
            counts["auc"] += 1
        except UndefinedMetricError:
            skipped["auc"] += 1

        sums["dist"] += l2_distance(pred_point, gt_avg)
        counts["dist"] += 1
        sums["min_dist"] += min_distance(pred_point, gaze_points)
        counts["min_dist"] += 1

        try:
            eye = rec.eye_normalized
            sums["angular_deg"] += angular_error(eye, pred_point, gt_avg)
            counts["angular_deg"] += 1
        except DegenerateGazeError:
            skipped["angular_deg"] += 1

    means = {k: (sums[k] / counts[k] if counts[k] else None) for k in sums}
    return EvalReport(auc=means["auc"], dist=means["dist"],
                      min_dist=means["min_dist"], angular_deg=means["angular_deg"],
                      n_samples=len(records), n_skipped=skipped)
