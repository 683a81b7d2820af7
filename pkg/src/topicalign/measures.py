"""Distances and scores on the probability simplex.

All logarithms are natural, so the Jensen-Shannon divergence is bounded by
ln 2.
"""
from __future__ import annotations

import numpy as np

from .errors import LengthMismatch, TooFewTopics, ZeroVector

__all__ = ["kl", "jsd", "cosine_similarity", "distinctiveness", "check_simplex", "LN2"]

LN2 = float(np.log(2.0))

# Clamp for probabilities inside log ratios; posterior-mean topic estimates
# are strictly positive under Dirichlet smoothing, so this only matters for
# hand-constructed inputs with exact zeros.
CLAMP = 1e-12


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape[0] != q.shape[0]:
        raise LengthMismatch(f"lengths {p.shape[0]} and {q.shape[0]} differ")
    return p, q


def check_simplex(x, tol: float = 1e-9) -> np.ndarray:
    """Validate that ``x`` is a probability vector; returns it as float64."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 1:
        raise LengthMismatch("empty vector")
    if np.any(x < 0):
        raise ValueError("simplex vector has negative entries")
    if abs(float(x.sum()) - 1.0) > tol:
        raise ValueError(f"simplex vector sums to {x.sum()!r}, not 1")
    return x


def kl(a, b) -> float:
    """Kullback-Leibler divergence sum(a_i log(a_i / b_i)), with 0 log 0 = 0.

    Returns ``inf`` when a puts mass where b has none.
    """
    a, b = _pair(a, b)
    support = a > 0
    if np.any(b[support] == 0):
        return float("inf")
    a, b = a[support], b[support]
    return float(np.sum(a * np.log(a / b)))


def jsd(p, q) -> float:
    """Jensen-Shannon divergence: symmetrized KL to the midpoint mixture."""
    p, q = _pair(p, q)
    m = 0.5 * (p + q)
    return max(0.0, 0.5 * kl(p, m) + 0.5 * kl(q, m))


def cosine_similarity(p, q) -> float:
    p, q = _pair(p, q)
    np_, nq = float(np.linalg.norm(p)), float(np.linalg.norm(q))
    if np_ == 0.0 or nq == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(p @ q) / (np_ * nq)


def distinctiveness(d: int, topics) -> float:
    """How strongly some topic separates on feature ``d`` from all others.

    For each topic k the worst-case margin against every other topic l is
        b_kd * log(b_kd / b_ld) + b_ld - b_kd,
    with probabilities clamped at 1e-12 inside the log ratio; the score is the
    best such worst case over k.  Topics may come from several models; the
    caller concatenates them.
    """
    topics = np.asarray(topics, dtype=np.float64)
    if topics.ndim != 2:
        topics = np.atleast_2d(topics)
    t = topics.shape[0]
    if t < 2:
        raise TooFewTopics(f"need at least 2 topics, got {t}")
    col = topics[:, d]
    clamped = np.maximum(col, CLAMP)
    # margin[k, l] for all ordered pairs; diagonal excluded below
    margin = col[:, None] * np.log(clamped[:, None] / clamped[None, :]) \
        + col[None, :] - col[:, None]
    np.fill_diagonal(margin, np.inf)
    return float(np.max(np.min(margin, axis=1)))
