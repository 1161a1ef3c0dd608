"""Per-pixel anomaly scoring functions.

Four competing rules, all oriented so that higher output means more
anomalous: maximum softmax probability (msp), raw negated class scores,
softmax over cosine scores, and the prototype score (pans), which rescales
bounded cosine scores into binary per-class probabilities.
"""

import numpy as np

from .errors import InvalidInputError
from .grids import AnomalyMap, ScoreMap, softmax

# Cosine scores may drift past [-1, 1] by float noise; anything worse is a
# sign the scores came from the wrong head.
COSINE_RANGE_TOL = 1e-9


def msp(scores: ScoreMap, tau: float = 1.0) -> AnomalyMap:
    """1 - max class probability under softmax(tau * s). Values in [0, 1 - 1/C]."""
    p = softmax(scores.data, tau)
    return AnomalyMap(1.0 - p.max(axis=2))


def raw_score(scores: ScoreMap) -> AnomalyMap:
    """Negated max class score. Unbounded; valid for ranking metrics only."""
    return AnomalyMap(-scores.data.max(axis=2))


def _clamped_cosine(scores: ScoreMap) -> np.ndarray:
    data = scores.data
    worst = max(float(data.max()) - 1.0, -1.0 - float(data.min()))
    if worst > COSINE_RANGE_TOL:
        raise InvalidInputError(
            f"scores exceed [-1, 1] by {worst:.3g}; this scorer needs cosine-head scores")
    return np.clip(data, -1.0, 1.0)


def cosine_softmax(scores: ScoreMap, tau: float) -> AnomalyMap:
    """msp applied to cosine scores with the training temperature."""
    p = softmax(_clamped_cosine(scores), tau)
    return AnomalyMap(1.0 - p.max(axis=2))


def pans(scores: ScoreMap) -> AnomalyMap:
    """1 - max binary probability, where sbar = (s + 1) / 2 per class.

    0 when some prototype matches perfectly (cos = 1), 1 when every
    prototype is anti-aligned (cos = -1).
    """
    s = _clamped_cosine(scores)
    return AnomalyMap(1.0 - (s.max(axis=2) + 1.0) / 2.0)
