"""Pixel-level anomaly detection and segmentation metrics.

Anomaly pixels (label 255) are the positives for AUROC/AUPR/FPR95 and are
excluded from IoU. Thresholds sweep every distinct score with tie groups
collapsed; ROC integration is trapezoidal (ties half-counted, matching the
Mann-Whitney statistic) and AUPR is step-wise average precision. Counts are
accumulated as integers and normalized once, so perfect separation yields
exactly 1.0 / 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NonFiniteError, UndefinedMetricError
from .grids import ANOMALY_ID, AnomalyMap, LabelMask


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    aupr: float
    fpr95: float
    positives: int
    negatives: int


@dataclass(frozen=True)
class IoUReport:
    per_class_iou: np.ndarray      # (C,), NaN where the class has zero union
    miou: float                    # mean over classes with defined IoU
    per_class_support: np.ndarray  # (C,) truth pixel counts, anomaly excluded

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.per_class_iou)


def _curve(scores: np.ndarray, positive: np.ndarray):
    """Cumulative (tp, fp) integer counts at every distinct score, descending."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = positive[order]
    tp = np.cumsum(pos, dtype=np.int64)
    fp = np.cumsum(~pos, dtype=np.int64)
    last_of_group = np.ones(len(s), dtype=bool)
    last_of_group[:-1] = s[:-1] != s[1:]
    return tp[last_of_group], fp[last_of_group]


def _flatten(anomaly: AnomalyMap, mask: LabelMask):
    if (anomaly.height, anomaly.width) != (mask.height, mask.width):
        raise InvalidInputError(
            f"anomaly map {anomaly.height}x{anomaly.width} does not match "
            f"mask {mask.height}x{mask.width}")
    return anomaly.data.reshape(-1), (mask.labels == ANOMALY_ID).reshape(-1)


def _check_pixels(scores: np.ndarray, positive: np.ndarray):
    if scores.shape != positive.shape or scores.ndim != 1:
        raise InvalidInputError("scores and positives must be aligned 1-d arrays")
    if not np.all(np.isfinite(scores)):
        raise NonFiniteError("anomaly scores contain non-finite values")
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"metrics need at least one positive and one negative pixel "
            f"(got {n_pos} positives, {n_neg} negatives)")
    return n_pos, n_neg


def _auroc(tp, fp, n_pos, n_neg) -> float:
    # trapezoid in count space: sum of dFP * (TP_k + TP_k-1), halved at the end
    dfp = np.diff(fp, prepend=0)
    tp_prev = np.concatenate(([0], tp[:-1]))
    area2 = int(np.sum(dfp * (tp + tp_prev)))
    return area2 / (2.0 * n_pos * n_neg)


def _aupr(tp, fp, n_pos) -> float:
    dtp = np.diff(tp, prepend=0)
    precision = tp / (tp + fp)
    return float(np.sum(dtp * precision) / n_pos)


def _fpr95(tp, fp, n_pos, n_neg) -> float:
    tpr = tp / n_pos
    k = int(np.argmax(tpr >= 0.95))  # first step reaching 95% recall
    return float(fp[k] / n_neg)


def evaluate_pixels(scores: np.ndarray, positive: np.ndarray) -> EvalReport:
    """All three anomaly metrics over flat pixel arrays (one shared sort)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    positive = np.asarray(positive, dtype=bool).reshape(-1)
    n_pos, n_neg = _check_pixels(scores, positive)
    tp, fp = _curve(scores, positive)
    return EvalReport(
        auroc=_auroc(tp, fp, n_pos, n_neg),
        aupr=_aupr(tp, fp, n_pos),
        fpr95=_fpr95(tp, fp, n_pos, n_neg),
        positives=n_pos,
        negatives=n_neg,
    )


def auroc(anomaly: AnomalyMap, mask: LabelMask) -> float:
    """Area under the ROC curve; anomaly pixels are positives."""
    scores, positive = _flatten(anomaly, mask)
    n_pos, n_neg = _check_pixels(scores, positive)
    tp, fp = _curve(scores, positive)
    return _auroc(tp, fp, n_pos, n_neg)


def aupr(anomaly: AnomalyMap, mask: LabelMask) -> float:
    """Step-wise average precision with anomaly pixels as positives."""
    scores, positive = _flatten(anomaly, mask)
    n_pos, _ = _check_pixels(scores, positive)
    tp, fp = _curve(scores, positive)
    return _aupr(tp, fp, n_pos)


def fpr95(anomaly: AnomalyMap, mask: LabelMask) -> float:
    """False-positive rate at the first threshold step with TPR >= 0.95."""
    scores, positive = _flatten(anomaly, mask)
    n_pos, n_neg = _check_pixels(scores, positive)
    tp, fp = _curve(scores, positive)
    return _fpr95(tp, fp, n_pos, n_neg)


def evaluate(anomaly: AnomalyMap, mask: LabelMask) -> EvalReport:
    """AUROC, AUPR and FPR95 in one pass."""
    scores, positive = _flatten(anomaly, mask)
    return evaluate_pixels(scores, positive)


def _iou_counts(predictions: LabelMask, truth: LabelMask, classes: int):
    if (predictions.height, predictions.width) != (truth.height, truth.width):
        raise InvalidInputError(
            f"prediction mask {predictions.height}x{predictions.width} does not match "
            f"truth {truth.height}x{truth.width}")
    valid = truth.labels != ANOMALY_ID
    p = predictions.labels[valid]
    t = truth.labels[valid]
    inter = np.zeros(classes, dtype=np.int64)
    union = np.zeros(classes, dtype=np.int64)
    support = np.zeros(classes, dtype=np.int64)
    for c in range(classes):
        pc = p == c
        tc = t == c
        inter[c] = np.count_nonzero(pc & tc)
        union[c] = np.count_nonzero(pc | tc)
        support[c] = np.count_nonzero(tc)
    return inter, union, support


def _iou_report(inter, union, support) -> IoUReport:
    with np.errstate(invalid="ignore"):
        per_class = np.where(union > 0, inter / np.maximum(union, 1), np.nan)
    defined = union > 0
    miou = float(per_class[defined].mean()) if defined.any() else float("nan")
    return IoUReport(per_class_iou=per_class, miou=miou, per_class_support=support)


def iou(predictions: LabelMask, truth: LabelMask, classes: int) -> IoUReport:
    """Per-class intersection-over-union; truth anomaly pixels are excluded."""
    inter, union, support = _iou_counts(predictions, truth, classes)
    return _iou_report(inter, union, support)


def iou_pooled(predictions, truths, classes: int) -> IoUReport:
    """IoU with intersections and unions pooled over several mask pairs."""
    inter = np.zeros(classes, dtype=np.int64)
    union = np.zeros(classes, dtype=np.int64)
    support = np.zeros(classes, dtype=np.int64)
    for pred, truth in zip(predictions, truths):
        i, u, s = _iou_counts(pred, truth, classes)
        inter += i
        union += u
        support += s
    return _iou_report(inter, union, support)
