"""Ground-truth distinguishers used to validate the closed-form bounds.

The binary and regression oracles enumerate the sufficient statistic (the
number of property-positive samples) exactly. The Zipf oracle is a
Monte-Carlo run of the exact likelihood-ratio test.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, TooLarge
from .leakage import _as_pair

MAX_ENUM_N = 64

# Monte-Carlo trials are generated in fixed-size blocks, each with its own
# substream keyed by (seed, block index); partitions are unions of blocks.
MC_BLOCK = 4096


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int


@dataclass(frozen=True)
class AttackAccuracy:
    """Overall accuracy plus per-class correct rates of a set of predictions."""

    accuracy: float
    rate0: float  # Pr[pred = 0 | truth = 0]
    rate1: float  # Pr[pred = 1 | truth = 1]
    n0: int
    n1: int

    @property
    def advantage(self):
        # |Pr[pred=1 | b=1] - Pr[pred=1 | b=0]|
        if self.n0 == 0 or self.n1 == 0:
            return None
        return abs(self.rate1 - (1.0 - self.rate0))


def _binom_pmf(n, p):
    return [math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)]


def exact_optimal_accuracy(pair, n):
    """Bayes accuracy of the optimal test between two ratio distributions from ``n`` samples.

    Equal priors; computed as ``1/2 * sum_k max(pmf0(k), pmf1(k))`` over the
    positive count ``k``.
    """
    if n > MAX_ENUM_N:
        raise TooLarge(f"n={n} exceeds the enumeration limit {MAX_ENUM_N}")
    p = _as_pair(pair)
    pmf0 = _binom_pmf(n, p.alpha0)
    pmf1 = _binom_pmf(n, p.alpha1)
    return 0.5 * math.fsum(max(a, b) for a, b in zip(pmf0, pmf1))


def exact_regression_mse(alpha, n):
    """Expected squared error of the sample-ratio estimator, by enumeration."""
    if n > MAX_ENUM_N:
        raise TooLarge(f"n={n} exceeds the enumeration limit {MAX_ENUM_N}")
    pmf = _binom_pmf(n, alpha)
    return math.fsum(w * (k / n - alpha) ** 2 for k, w in enumerate(pmf))


def _zipf_tables(spec, support):
    k = np.arange(1, support + 1, dtype=np.float64)
    logpmf = np.full(support, -np.inf)
    raw = k[: spec.n_elems] ** (-float(spec.exponent))
    total = math.fsum(raw)
    logpmf[: spec.n_elems] = np.log(raw / total)
    cdf = np.cumsum(raw / total)
    cdf[-1] = 1.0
    return logpmf, cdf


def _mc_zipf_block(tables, n, seed, block, size):
    logpmf0, cdf0, logpmf1, cdf1 = tables
    rng = np.random.default_rng([seed, block])
    b = rng.integers(0, 2, size=size)
    u = rng.random((size, n))
    draws0 = np.searchsorted(cdf0, u, side="right")
    draws1 = np.searchsorted(cdf1, u, side="right")
    idx = np.where(b[:, None] == 1, draws1, draws0)
    ll0 = logpmf0[idx].sum(axis=1)
    ll1 = logpmf1[idx].sum(axis=1)
    # a value outside one support gives -inf there and forces the other side
    decide1 = ll1 > ll0
    return int(np.count_nonzero(decide1.astype(int) == b))


def mc_optimal_accuracy_zipf(spec0, spec1, n, trials, seed, workers=1):
    """Monte-Carlo accuracy of the likelihood-ratio test between two Zipf laws.

    Each trial draws ``b`` uniformly and ``n`` iid values from Zipf(spec_b),
    then decides by the exact log-likelihood ratio (ties decide 0).
    Deterministic in ``seed``; the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    support = max(spec0.n_elems, spec1.n_elems)
    lp0, c0 = _zipf_tables(spec0, support)
    lp1, c1 = _zipf_tables(spec1, support)
    tables = (lp0, c0, lp1, c1)

    sizes = [MC_BLOCK] * (trials // MC_BLOCK)
    if trials % MC_BLOCK:
        sizes.append(trials % MC_BLOCK)
    jobs = [(blk, size) for blk, size in enumerate(sizes)]

    def run(job):
        return _mc_zipf_block(tables, n, seed, *job)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            correct = sum(pool.map(run, jobs))
    else:
        correct = sum(map(run, jobs))
    p = correct / trials
    return McEstimate(mean=p, std_error=math.sqrt(p * (1.0 - p) / trials), trials=trials, seed=seed)


def exact_optimal_accuracy_zipf_single(spec0, spec1):
    """Single-sample Bayes accuracy between two Zipf laws by enumerating the support."""
    support = max(spec0.n_elems, spec1.n_elems)
    lp0, _ = _zipf_tables(spec0, support)
    lp1, _ = _zipf_tables(spec1, support)
    return 0.5 * math.fsum(np.maximum(np.exp(lp0), np.exp(lp1)))


def mc_attack_accuracy(predictions, truths):
    """Fraction of correct predictions and per-class correct rates."""
    pred = np.asarray(predictions, dtype=int)
    truth = np.asarray(truths, dtype=int)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise LengthMismatch(f"need equal nonempty lengths, got {pred.shape} and {truth.shape}")
    correct = pred == truth
    n0 = int(np.count_nonzero(truth == 0))
    n1 = int(np.count_nonzero(truth == 1))
    rate0 = float(correct[truth == 0].mean()) if n0 else math.nan
    rate1 = float(correct[truth == 1].mean()) if n1 else math.nan
    return AttackAccuracy(float(correct.mean()), rate0, rate1, n0, n1)
