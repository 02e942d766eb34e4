"""Ranking layers by how well their activation counts separate two distributions.

For a ReLU layer ``j`` the adversary picks the query input whose count of
active units differs most between its two groups of shadow models, then
fits a threshold on that count exactly as the Threshold Test does on
accuracies. Holdout accuracy of that rule ranks the layers.
"""

from __future__ import annotations

import numpy as np

from ..nets import activations_batch
from .blackbox import fit_threshold


def activation_count(net, x, j):
    """Number of strictly positive activations after ReLU layer ``j`` for input ``x``."""
    return int(np.count_nonzero(activations_batch(net, np.asarray(x, dtype=float)[None], j) > 0))


def count_matrix(models, candidates, j):
    """Active-unit counts, shape ``(n_models, n_candidates)``."""
    X = np.asarray(candidates, dtype=float)
    return np.stack([(activations_batch(m, X, j) > 0).sum(axis=1) for m in models])


def _signed_gaps(counts, y):
    return counts[y == 0].sum(axis=0) - counts[y == 1].sum(axis=0)


def layer_select(pool, candidates, j):
    """Candidate maximizing the count gap between the two groups; first one wins ties.

    Returns ``(index, candidate, gap)``.
    """
    y = pool.labels()
    if len(candidates) == 0:
        raise ValueError("no candidate inputs")
    gaps = np.abs(_signed_gaps(count_matrix(pool.models, candidates, j), y))
    best = int(np.argmax(gaps))
    return best, np.asarray(candidates[best]), float(gaps[best])


def layer_rank(pool, candidates, holdout):
    """Rank ReLU layers by holdout accuracy of a count-threshold rule.

    Returns ``[(arch index, holdout accuracy), ...]`` sorted by descending
    accuracy, lower index first on ties.
    """
    y = pool.labels()
    y_hold = holdout.labels()
    cands = np.asarray(candidates, dtype=float)
    results = []
    for j in pool.models[0].relu_indices:
        counts = count_matrix(pool.models, cands, j)
        signed = _signed_gaps(counts, y)
        best = int(np.argmax(np.abs(signed)))
        zero_high = signed[best] >= 0
        lam, _, _ = fit_threshold(counts[:, best], y, zero_high)
        hold = count_matrix(holdout.models, cands[best : best + 1], j)[:, 0]
        # predicted 1 on the side where label-1 models sit
        pred = (hold < lam) if zero_high else (hold >= lam)
        results.append((j, float(np.mean(pred.astype(int) == y_hold))))
    return sorted(results, key=lambda t: (-t[1], t[0]))
