"""Prosodic dissimilarity and nearest/farthest retrieval.

Dissimilarity is the unweighted Euclidean distance between two 100-dim
ProsodyVectors. Retrieval sorts a pool by (distance, utterance_id) so ties
are deterministic, and returns the k most similar and k most dissimilar.
"""

from __future__ import annotations

import numpy as np

from .errors import FeatureError
from .midlevel import N_DIMS, ProsodyVector


def dissimilarity(a: ProsodyVector, b: ProsodyVector) -> float:
    """Euclidean distance between two prosody vectors, all dims equal weight."""
    va, vb = a.values, b.values
    if va.shape != (N_DIMS,) or vb.shape != (N_DIMS,):
        raise FeatureError(
            f"expected {N_DIMS}-dim vectors, got {va.shape} and {vb.shape}"
        )
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise FeatureError("non-finite values in prosody vector")
    d = va - vb
    return float(np.sqrt(np.dot(d, d)))


def neighbors(
    anchor: ProsodyVector, pool: list[ProsodyVector], k: int = 4
) -> tuple[list, list]:
    """(k most similar, k most dissimilar) to the anchor within the pool.

    The anchor itself is excluded by utterance_id. Returns two lists of
    (vector, distance); the dissimilar list is in descending distance."""
    candidates = [p for p in pool if p.utterance_id != anchor.utterance_id]
    if not candidates:
        raise ValueError("empty retrieval pool")
    if k > len(candidates):
        raise ValueError(f"k={k} exceeds pool size {len(candidates)}")
    ranked = sorted(
        ((dissimilarity(anchor, p), p) for p in candidates),
        key=lambda t: (t[0], t[1].utterance_id),
    )
    similar = [(p, d) for d, p in ranked[:k]]
    dissimilar = [(p, d) for d, p in ranked[-k:]][::-1]
    return similar, dissimilar
