"""Prototype-based anomaly segmentation.

Learn class prototypes with a cosine classifier, score per-pixel anomalies
(msp, raw class scores, cosine+softmax, pans), and evaluate with pixel-level
AUROC/AUPR/FPR95 and per-class IoU, on synthetic or imported feature maps.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .anomaly import cosine_softmax, msp, pans, raw_score
from .classifier import (TrainConfig, TrainReport, cosine_scores, cross_entropy_loss,
                         linear_scores, loss_gradient, predict_labels, scores_for, train)
from .errors import (FormatError, InvalidConfigError, InvalidInputError, InvalidModelError,
                     NonFiniteError, PansError, UndefinedMetricError)
from .grids import (ANOMALY_ID, COSINE, LINEAR, AnomalyMap, FeatureMap, LabelMask,
                    PrototypeBank, ScoreMap, argmax_class, softmax)
from .metrics import (EvalReport, IoUReport, aupr, auroc, evaluate, evaluate_pixels,
                      fpr95, iou, iou_pooled)
from .synth import SynthConfig, direction_basis, generate

__version__ = "0.1.0"

__all__ = [
    "ANOMALY_ID", "COSINE", "LINEAR", "KERNEL_BACKEND",
    "AnomalyMap", "FeatureMap", "LabelMask", "PrototypeBank", "ScoreMap",
    "softmax", "argmax_class",
    "TrainConfig", "TrainReport", "cosine_scores", "linear_scores", "scores_for",
    "cross_entropy_loss", "loss_gradient", "predict_labels", "train",
    "msp", "raw_score", "cosine_softmax", "pans",
    "EvalReport", "IoUReport", "auroc", "aupr", "fpr95", "evaluate",
    "evaluate_pixels", "iou", "iou_pooled",
    "SynthConfig", "generate", "direction_basis",
    "PansError", "InvalidInputError", "NonFiniteError", "InvalidConfigError",
    "InvalidModelError", "UndefinedMetricError", "FormatError",
]
