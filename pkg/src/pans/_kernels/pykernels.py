"""Numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available (and the reference the compiled kernels are checked against).
All functions take float64 C-contiguous arrays with pixels flattened to
rows: features (N, d), weights (C, d), labels (N,) int64.
"""

import numpy as np

# Feature rows with norm below this score 0 against every class.
ZERO_NORM_EPS = 1e-12


def cosine_scores(feats: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Cosine similarity of every feature row with every prototype, in [-1, 1]."""
    wnorm = np.linalg.norm(weights, axis=1)
    what = weights / wnorm[:, None]
    fnorm = np.linalg.norm(feats, axis=1)
    safe = fnorm >= ZERO_NORM_EPS
    u = np.zeros_like(feats)
    u[safe] = feats[safe] / fnorm[safe, None]
    s = u @ what.T
    np.clip(s, -1.0, 1.0, out=s)
    return s


def linear_scores(feats: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine logits: feats @ weights.T + bias."""
    return feats @ weights.T + bias


def _softmax_stats(z: np.ndarray, labels: np.ndarray):
    n = z.shape[0]
    m = z.max(axis=1)
    ez = np.exp(z - m[:, None])
    zsum = ez.sum(axis=1)
    logp_y = z[np.arange(n), labels] - m - np.log(zsum)
    p = ez / zsum[:, None]
    return float(-logp_y.mean()), p


def ce_loss_grad_cosine(feats: np.ndarray, weights: np.ndarray, labels: np.ndarray, tau: float):
    """Cross-entropy loss, prototype gradient, and correct count for a cosine head.

    Returns (loss, grad (C, d), n_correct). The gradient chains
    tau * (p_c - [c == y]) with
    d s_c / d w_c = (f/||f|| - s_c * w_c/||w_c||) / ||w_c||.
    """
    n = feats.shape[0]
    wnorm = np.linalg.norm(weights, axis=1)
    what = weights / wnorm[:, None]
    fnorm = np.linalg.norm(feats, axis=1)
    safe = fnorm >= ZERO_NORM_EPS
    u = np.zeros_like(feats)
    u[safe] = feats[safe] / fnorm[safe, None]
    s = u @ what.T
    np.clip(s, -1.0, 1.0, out=s)
    loss, p = _softmax_stats(tau * s, labels)
    g = tau * p
    g[np.arange(n), labels] -= tau
    grad = (g.T @ u - (g * s).sum(axis=0)[:, None] * what) / (n * wnorm[:, None])
    correct = int(np.count_nonzero(np.argmax(s, axis=1) == labels))
    return loss, grad, correct


def ce_loss_grad_linear(feats: np.ndarray, weights: np.ndarray, bias: np.ndarray,
                        labels: np.ndarray, tau: float):
    """Cross-entropy loss and gradients for a linear head.

    Returns (loss, grad_w (C, d), grad_b (C,), n_correct).
    """
    n = feats.shape[0]
    s = feats @ weights.T + bias
    loss, p = _softmax_stats(tau * s, labels)
    g = tau * p
    g[np.arange(n), labels] -= tau
    grad_w = g.T @ feats / n
    grad_b = g.sum(axis=0) / n
    correct = int(np.count_nonzero(np.argmax(s, axis=1) == labels))
    return loss, grad_w, grad_b, correct
