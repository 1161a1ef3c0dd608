"""Core grid types and shared numeric utilities.

All grids are row-major, pixel-then-channel. Values are held as float64
internally; the on-disk formats (see :mod:`pans.formats`) store float32.
Every type is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, InvalidModelError, NonFiniteError

# Reserved mask value for anomalous pixels. Class ids live in 0..254.
ANOMALY_ID = 255

COSINE = "cosine"
LINEAR = "linear"


def _finite_or_raise(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite values")


def _float_grid(data, ndim: int, name: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, order="C")
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} must not be empty")
    _finite_or_raise(arr, name)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """H x W grid of d-dimensional feature vectors."""

    data: np.ndarray  # (H, W, d) float64

    def __post_init__(self):
        object.__setattr__(self, "data", _float_grid(self.data, 3, "feature map"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> np.ndarray:
        """Flattened (H*W, d) view."""
        return self.data.reshape(-1, self.data.shape[2])


@dataclass(frozen=True)
class ScoreMap:
    """H x W grid of per-class scores (cosine similarities or linear logits)."""

    data: np.ndarray  # (H, W, C) float64

    def __post_init__(self):
        arr = _float_grid(self.data, 3, "score map")
        if arr.shape[2] < 2:
            raise InvalidInputError(f"score map needs at least 2 classes, got {arr.shape[2]}")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> np.ndarray:
        return self.data.reshape(-1, self.data.shape[2])


@dataclass(frozen=True)
class AnomalyMap:
    """H x W grid of per-pixel anomaly scores (higher = more anomalous)."""

    data: np.ndarray  # (H, W) float64

    def __post_init__(self):
        object.__setattr__(self, "data", _float_grid(self.data, 2, "anomaly map"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LabelMask:
    """H x W integer class labels; ANOMALY_ID (255) marks anomalous pixels.

    Training masks must not contain ANOMALY_ID; evaluation masks may.
    """

    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidInputError(f"label mask must be a non-empty 2-d grid, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise InvalidInputError(f"label mask must hold integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise InvalidInputError("label values must lie in 0..255")
        arr = np.array(arr, dtype=np.uint8, order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def anomaly_id(self) -> int:
        return ANOMALY_ID

    def anomaly_pixels(self) -> np.ndarray:
        """Boolean (H, W) grid marking ANOMALY_ID pixels."""
        return self.labels == ANOMALY_ID

    def check_training(self, classes: int) -> None:
        """Reject masks unusable for training: anomaly pixels or labels >= classes."""
        if bool(np.any(self.labels == ANOMALY_ID)):
            raise InvalidInputError("training mask contains anomaly pixels (label 255)")
        top = int(self.labels.max())
        if top >= classes:
            raise InvalidInputError(f"label {top} out of range for {classes} classes")


@dataclass(frozen=True)
class PrototypeBank:
    """C prototype vectors of dimension d, plus an optional linear-head bias."""

    weights: np.ndarray  # (C, d) float64
    head_kind: str = COSINE
    bias: np.ndarray | None = None

    def __post_init__(self):
        if self.head_kind not in (COSINE, LINEAR):
            raise InvalidModelError(f"unknown head kind {self.head_kind!r}")
        w = np.array(self.weights, dtype=np.float64, order="C")
        if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 1:
            raise InvalidModelError(f"weights must be (C>=2, d>=1), got shape {w.shape}")
        _finite_or_raise(w, "prototype weights")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.head_kind == COSINE:
            if self.bias is not None:
                raise InvalidModelError("cosine head does not take a bias")
            norms = np.linalg.norm(w, axis=1)
            if bool(np.any(norms <= 0.0)):
                raise InvalidModelError("cosine prototypes must have strictly positive norm")
        else:
            if self.bias is None:
                raise InvalidModelError("linear head requires a bias vector")
            b = np.array(self.bias, dtype=np.float64, order="C")
            if b.shape != (w.shape[0],):
                raise InvalidModelError(f"bias shape {b.shape} does not match {w.shape[0]} classes")
            _finite_or_raise(b, "bias")
            b.flags.writeable = False
            object.__setattr__(self, "bias", b)

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def softmax(scores, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax over the last axis.

    Computes softmax(temperature * scores) with max-subtraction for numerical
    stability. The output sums to 1 along the last axis within 1e-12.
    """
    if not np.isfinite(temperature) or temperature <= 0.0:
        raise InvalidConfigError(f"temperature must be positive, got {temperature}")
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("softmax of an empty vector is undefined")
    _finite_or_raise(arr, "softmax input")
    z = temperature * arr
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def argmax_class(scores) -> int:
    """Index of the maximum score; ties broken by lowest index."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("argmax_class needs a non-empty 1-d vector")
    _finite_or_raise(arr, "argmax_class input")
    return int(np.argmax(arr))
