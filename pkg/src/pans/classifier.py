"""Classification heads over feature maps and the prototype trainer.

The cosine head scores a pixel against each class prototype with the cosine
of the angle between them, so scores live in [-1, 1]. The linear head is the
usual affine logit layer. Training minimizes temperature-scaled cross-entropy
with full-batch gradient descent over all pixels of all scenes; gradients are
analytic (no autograd).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import InvalidConfigError, InvalidInputError, InvalidModelError
from .grids import ANOMALY_ID, COSINE, LINEAR, FeatureMap, LabelMask, PrototypeBank, ScoreMap

POLY = "poly"
CONSTANT = "constant"


def _check_pair(features: FeatureMap, bank: PrototypeBank) -> None:
    if features.dim != bank.dim:
        raise InvalidInputError(
            f"feature dimension {features.dim} does not match prototype dimension {bank.dim}")


def cosine_scores(features: FeatureMap, bank: PrototypeBank) -> ScoreMap:
    """Cosine similarity between every pixel feature and every prototype.

    Pixels whose feature norm is below 1e-12 score 0 against all classes.
    """
    if bank.head_kind != COSINE:
        raise InvalidModelError("cosine_scores requires a cosine-head bank")
    _check_pair(features, bank)
    flat = kernels.cosine_scores(features.pixels, bank.weights)
    return ScoreMap(flat.reshape(features.height, features.width, bank.classes))


def linear_scores(features: FeatureMap, bank: PrototypeBank) -> ScoreMap:
    """Affine logits: feature . w_c + b_c per pixel and class. Unbounded."""
    if bank.head_kind != LINEAR:
        raise InvalidModelError("linear_scores requires a linear-head bank")
    _check_pair(features, bank)
    flat = kernels.linear_scores(features.pixels, bank.weights, bank.bias)
    return ScoreMap(flat.reshape(features.height, features.width, bank.classes))


def scores_for(features: FeatureMap, bank: PrototypeBank) -> ScoreMap:
    """Dispatch to the head matching the bank."""
    if bank.head_kind == COSINE:
        return cosine_scores(features, bank)
    return linear_scores(features, bank)


def _check_labels(labels: LabelMask, classes: int, height: int, width: int) -> None:
    if (labels.height, labels.width) != (height, width):
        raise InvalidInputError(
            f"label mask {labels.height}x{labels.width} does not match grid {height}x{width}")
    if bool(np.any(labels.labels == ANOMALY_ID)):
        raise InvalidInputError("labels contain the anomaly id (255); loss is undefined there")
    top = int(labels.labels.max())
    if top >= classes:
        raise InvalidInputError(f"label {top} out of range for {classes} classes")


def cross_entropy_loss(scores: ScoreMap, labels: LabelMask, tau: float) -> float:
    """Mean over pixels of -log softmax(tau * s)[y]."""
    if not np.isfinite(tau) or tau <= 0.0:
        raise InvalidConfigError(f"tau must be positive, got {tau}")
    _check_labels(labels, scores.classes, scores.height, scores.width)
    z = tau * scores.pixels
    y = labels.labels.reshape(-1).astype(np.int64)
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    logp_y = z[np.arange(z.shape[0]), y] - lse
    return float(-logp_y.mean())


def loss_gradient(features: FeatureMap, bank: PrototypeBank, labels: LabelMask,
                  tau: float) -> np.ndarray:
    """Analytic gradient of the cross-entropy loss w.r.t. each cosine prototype.

    Returns a (C, d) matrix. The per-pixel chain rule composes
    tau * (p_c - [c == y]) with the derivative of the normalized dot product,
    d s_c / d w_c = f/(||f|| ||w_c||) - (<f, w_c>/(||f|| ||w_c||^3)) w_c.
    """
    if bank.head_kind != COSINE:
        raise InvalidModelError("loss_gradient is defined for the cosine head")
    if not np.isfinite(tau) or tau <= 0.0:
        raise InvalidConfigError(f"tau must be positive, got {tau}")
    _check_pair(features, bank)
    _check_labels(labels, bank.classes, features.height, features.width)
    y = labels.labels.reshape(-1).astype(np.int64)
    _, grad, _ = kernels.ce_loss_grad_cosine(features.pixels, bank.weights, y, tau)
    return grad


def predict_labels(scores: ScoreMap) -> LabelMask:
    """Per-pixel argmax class; ties broken by lowest class index."""
    return LabelMask(np.argmax(scores.data, axis=2).astype(np.uint8))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the full-batch gradient-descent trainer."""

    tau: float = 10.0
    learning_rate: float = 0.1
    epochs: int = 200
    lr_schedule: str = POLY
    lr_power: float = 0.9
    seed: int = 0
    l2_weight: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0.0:
            raise InvalidConfigError(f"tau must be positive, got {self.tau}")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0.0:
            raise InvalidConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise InvalidConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_schedule not in (POLY, CONSTANT):
            raise InvalidConfigError(f"lr schedule must be poly or constant, got {self.lr_schedule!r}")
        if self.l2_weight < 0.0:
            raise InvalidConfigError(f"l2 weight must be >= 0, got {self.l2_weight}")


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch training curves plus the final bank."""

    losses: np.ndarray      # (epochs,) cross-entropy, recorded before each step
    accuracies: np.ndarray  # (epochs,) pixel accuracy at the same point
    bank: PrototypeBank

    epochs: int = field(init=False, default=0)

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=np.float64)
        accs = np.asarray(self.accuracies, dtype=np.float64)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "accuracies", accs)
        object.__setattr__(self, "epochs", len(losses))


def _as_batch(features, labels):
    if isinstance(features, FeatureMap):
        features = [features]
    if isinstance(labels, LabelMask):
        labels = [labels]
    features = list(features)
    labels = list(labels)
    if len(features) != len(labels) or not features:
        raise InvalidInputError("need one label mask per feature map, at least one pair")
    return features, labels


def init_prototypes(classes: int, dim: int, seed: int) -> np.ndarray:
    """Seeded standard-normal rows, normalized to unit norm."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((classes, dim))
    w /= np.linalg.norm(w, axis=1)[:, None]
    return w


def train(features, labels, config: TrainConfig, head_kind: str = COSINE,
          classes: int | None = None) -> TrainReport:
    """Full-batch gradient descent on pooled pixels of all scenes.

    ``features``/``labels`` may be single grids or aligned sequences. The
    class count is inferred from the labels unless given. Deterministic for a
    fixed (data, config.seed).
    """
    if head_kind not in (COSINE, LINEAR):
        raise InvalidConfigError(f"unknown head kind {head_kind!r}")
    features, labels = _as_batch(features, labels)
    dim = features[0].dim
    for fm, mask in zip(features, labels):
        if fm.dim != dim:
            raise InvalidInputError("feature maps in a batch must share one dimension")
        if (mask.height, mask.width) != (fm.height, fm.width):
            raise InvalidInputError("feature map and label mask shapes must match")
        if bool(np.any(mask.labels == ANOMALY_ID)):
            raise InvalidInputError("training mask contains anomaly pixels (label 255)")
    y = np.concatenate([m.labels.reshape(-1) for m in labels]).astype(np.int64)
    if classes is None:
        classes = int(y.max()) + 1
    classes = max(int(classes), 2)
    if int(y.max()) >= classes:
        raise InvalidInputError(f"label {int(y.max())} out of range for {classes} classes")
    feats = np.ascontiguousarray(np.concatenate([fm.pixels for fm in features], axis=0))
    n = feats.shape[0]

    weights = init_prototypes(classes, dim, config.seed)
    bias = np.zeros(classes) if head_kind == LINEAR else None

    losses = np.empty(config.epochs)
    accs = np.empty(config.epochs)
    for t in range(config.epochs):
        if config.lr_schedule == POLY:
            lr = config.learning_rate * (1.0 - t / config.epochs) ** config.lr_power
        else:
            lr = config.learning_rate
        if head_kind == COSINE:
            loss, grad, correct = kernels.ce_loss_grad_cosine(feats, weights, y, config.tau)
            weights = weights - lr * (grad + config.l2_weight * weights)
        else:
            loss, grad_w, grad_b, correct = kernels.ce_loss_grad_linear(
                feats, weights, bias, y, config.tau)
            weights = weights - lr * (grad_w + config.l2_weight * weights)
            bias = bias - lr * grad_b
        losses[t] = loss
        accs[t] = correct / n

    bank = PrototypeBank(weights, head_kind=head_kind,
                         bias=bias if head_kind == LINEAR else None)
    return TrainReport(losses=losses, accuracies=accs, bank=bank)
