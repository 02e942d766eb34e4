from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch, MissingLabel


@dataclass
class ShadowPool:
    """Models with the distribution label (and optionally the ratio) that trained each."""

    models: list
    dist_labels: list = field(default_factory=list)
    alpha_labels: list | None = None

    def __post_init__(self):
        self.models = list(self.models)
        self.dist_labels = [int(v) for v in self.dist_labels]
        if self.dist_labels and len(self.dist_labels) != len(self.models):
            raise LengthMismatch("dist_labels and models differ in length")
        if self.alpha_labels is not None:
            self.alpha_labels = [float(a) for a in self.alpha_labels]
            if len(self.alpha_labels) != len(self.models):
                raise LengthMismatch("alpha_labels and models differ in length")

    def __len__(self):
        return len(self.models)

    def labels(self):
        """Distribution labels as an array; both classes must be present."""
        y = np.asarray(self.dist_labels, dtype=int)
        if len(y) != len(self.models) or not (np.any(y == 0) and np.any(y == 1)):
            raise MissingLabel("binary pools need a 0/1 label per model, with both classes present")
        return y

    def alphas(self):
        if self.alpha_labels is None:
            raise MissingLabel("regression needs alpha_labels")
        return np.asarray(self.alpha_labels, dtype=float)

    @classmethod
    def binary(cls, models0, models1):
        models0, models1 = list(models0), list(models1)
        return cls(models0 + models1, [0] * len(models0) + [1] * len(models1))

    def __add__(self, other):
        alphas = None
        if self.alpha_labels is not None and other.alpha_labels is not None:
            alphas = self.alpha_labels + other.alpha_labels
        labels = self.dist_labels + other.dist_labels if self.dist_labels and other.dist_labels else []
        return ShadowPool(self.models + other.models, labels, alphas)
