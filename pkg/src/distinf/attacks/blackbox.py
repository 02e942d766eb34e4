"""Loss Test and Threshold Test: black-box attacks on model accuracies.

The threshold search in :func:`fit_threshold` is shared with the
layer-identification procedure, which runs it on activation counts instead
of accuracies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import EqualRatios, LengthMismatch, MissingLabel


class Direction(enum.Enum):
    """Rule for predicting ``b_hat = 1`` from a score and threshold."""

    GREATER_EQ = "ge"  # predict 1 iff score >= threshold
    LESS = "lt"  # predict 1 iff score < threshold


@dataclass(frozen=True)
class AttackRule:
    chosen_set: int
    threshold: float
    direction: Direction
    gamma: tuple
    train_correct: int = 0
    n_train: int = 0
    tied: bool = False

    @property
    def train_accuracy(self):
        return self.train_correct / self.n_train if self.n_train else float("nan")


def loss_test(acc0, acc1):
    """Predict the distribution whose test set the model scores better on.

    Returns ``(b_hat, tie)``; an exact tie predicts 0 and sets ``tie``.
    """
    if acc0 == acc1:
        return 0, True
    return int(acc0 < acc1), False


def _labels(dist_labels, n):
    y = np.asarray(dist_labels, dtype=int)
    if y.shape != (n,):
        raise LengthMismatch(f"{n} scores but {y.size} labels")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise MissingLabel("both distributions must be represented")
    return y


def delta(scores, labels, threshold, zero_high):
    """Number of correctly separated models at ``threshold``.

    With ``zero_high`` the models labelled 0 are expected at or above the
    threshold and those labelled 1 below it; otherwise the reverse.
    """
    s = np.asarray(scores, dtype=float)
    above = s >= threshold
    if zero_high:
        return int(np.count_nonzero(above & (labels == 0)) + np.count_nonzero(~above & (labels == 1)))
    return int(np.count_nonzero(~above & (labels == 0)) + np.count_nonzero(above & (labels == 1)))


def threshold_candidates(scores):
    """Midpoints between consecutive distinct scores plus one sentinel on each side.

    Sentinels are ``min - 1`` and ``max + 1`` so thresholds stay finite.
    """
    v = np.unique(np.asarray(scores, dtype=float))
    mids = (v[:-1] + v[1:]) / 2.0
    # adjacent floats: the midpoint rounds onto the lower score, the upper one still splits them
    mids = np.where(mids > v[:-1], mids, v[1:])
    top = v[-1] + 1.0
    if top <= v[-1]:
        top = np.nextafter(v[-1], np.inf)
    return np.concatenate([[v[0] - 1.0], mids, [top]])


def fit_threshold(scores, labels, zero_high):
    """Smallest candidate threshold maximizing :func:`delta`.

    Returns ``(threshold, best_delta, tied)``.
    """
    s = np.asarray(scores, dtype=float)
    cands = threshold_candidates(s)
    # vectorized delta over all candidates
    above = s[None, :] >= cands[:, None]
    if zero_high:
        hits = (above & (labels == 0)) | (~above & (labels == 1))
    else:
        hits = (~above & (labels == 0)) | (above & (labels == 1))
    d = hits.sum(axis=1)
    best = int(np.argmax(d))
    return float(cands[best]), int(d[best]), bool(np.count_nonzero(d == d[best]) > 1)


def threshold_fit(dist_labels, s0_accs, s1_accs):
    """Fit the Threshold Test on shadow-model accuracies.

    ``s0_accs[i]`` and ``s1_accs[i]`` are the accuracies of shadow model ``i``
    on the adversary's test sets drawn from the two candidate distributions;
    ``dist_labels[i]`` says which distribution trained it.
    """
    a0 = np.asarray(s0_accs, dtype=float)
    a1 = np.asarray(s1_accs, dtype=float)
    y = _labels(dist_labels, len(a0))
    if a1.shape != a0.shape:
        raise LengthMismatch("s0_accs and s1_accs differ in length")
    gamma = tuple(float(a[y == 0].sum() - a[y == 1].sum()) for a in (a0, a1))
    k = int(abs(gamma[0]) < abs(gamma[1]))
    zero_high = gamma[k] >= 0
    scores = a1 if k else a0
    lam, best, tied = fit_threshold(scores, y, zero_high)
    # label-1 models sit below the threshold when label-0 models sit above it
    direction = Direction.LESS if zero_high else Direction.GREATER_EQ
    return AttackRule(k, lam, direction, gamma, best, len(y), tied)


def threshold_apply(rule, target_acc_on_chosen_set):
    """Predict ``b_hat`` for a target model from its score on the chosen test set."""
    if rule.direction is Direction.GREATER_EQ:
        return int(target_acc_on_chosen_set >= rule.threshold)
    return int(target_acc_on_chosen_set < rule.threshold)


def regression_to_binary(pred, alpha0, alpha1):
    """Map a predicted ratio to the nearer of two candidate ratios (midpoint goes to 1).

    Assumes ``alpha0 < alpha1``, as the sweep orders pairs; for the reverse
    order the comparison flips so the nearer ratio still wins.
    """
    if alpha0 == alpha1:
        raise EqualRatios("regression-to-binary needs distinct ratios")
    mid = (alpha0 + alpha1) / 2.0
    if alpha0 < alpha1:
        return int(pred >= mid)
    return int(pred <= mid)
