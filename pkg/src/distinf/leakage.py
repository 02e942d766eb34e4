"""Closed-form leakage bounds and the ``n_leaked`` metric.

Everything here is a pure function of its arguments. Logarithms are
natural throughout; the ``n_leaked`` expressions are ratios of logs, so the
base cancels.

The accuracy bounds are computed as ``1/2 + 1/2 * sqrt(-expm1(n * log r))``
rather than ``sqrt(1 - r**n)``, and ``n_leaked`` uses
``log1p(-(2w - 1)**2)`` for ``log(4w(1 - w))``. The two pairs are
algebraically identical and the chosen forms keep precision when ``r**n``
is close to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateAlpha,
    EqualRatios,
    NonpositiveError,
    OmegaOutOfRange,
    UnorderedSpecs,
    ZeroDenominator,
)


@dataclass(frozen=True)
class RatioPair:
    """Property ratios ``alpha0``, ``alpha1`` of the two candidate distributions."""

    alpha0: float
    alpha1: float

    def __post_init__(self):
        for a in (self.alpha0, self.alpha1):
            if not (math.isfinite(a) and 0.0 <= a <= 1.0):
                raise ValueError(f"ratio {a!r} outside [0, 1]")

    @property
    def lo(self):
        return min(self.alpha0, self.alpha1)

    @property
    def hi(self):
        return max(self.alpha0, self.alpha1)


@dataclass(frozen=True)
class ZipfSpec:
    """Finite Zipf law on ``{1..n_elems}`` with pmf proportional to ``k**-exponent``."""

    n_elems: int
    exponent: float

    def __post_init__(self):
        if int(self.n_elems) != self.n_elems or self.n_elems < 1:
            raise ValueError(f"n_elems must be a positive integer, got {self.n_elems!r}")
        if not math.isfinite(self.exponent):
            raise ValueError("exponent must be finite")


@dataclass
class LeakageReport:
    """Outcome of one attack on one ``(alpha0, alpha1)`` pair.

    ``accuracy``, ``advantage`` and ``n_leaked`` are the core fields; the
    rest is provenance filled in by the experiment harness. ``accuracy`` is
    ``None`` for regression-only runs, where ``mse`` carries the result.
    """

    accuracy: float | None
    advantage: float | None
    n_leaked: float | None
    alpha0: float | None = None
    alpha1: float | None = None
    attack: str | None = None
    rep: int | None = None
    n_eval: int | None = None
    mse: float | None = None
    flags: list = field(default_factory=list)
    seed: int | None = None
    config_hash: str | None = None

    def to_dict(self):
        return {k: _encode_float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc):
        return cls(**{k: _decode_float(v) for k, v in doc.items()})


def _encode_float(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    return v


def _decode_float(v):
    if v in ("inf", "-inf", "nan"):
        return float(v)
    return v


def _as_pair(pair):
    if isinstance(pair, RatioPair):
        return pair
    a0, a1 = pair
    return RatioPair(float(a0), float(a1))


def _log_ratios(lo, hi):
    """``(log(lo / hi), log((1 - hi) / (1 - lo)))``, both <= 0, computed without cancellation.

    The complement ratio goes through ``log1p`` so pairs like ``(0, 1e-200)``
    keep a nonzero log instead of rounding the ratio to exactly 1.
    """
    if lo == hi:
        return 0.0, 0.0
    log_pos = -math.inf if lo == 0.0 else math.log(lo) - math.log(hi)
    log_neg = -math.inf if hi == 1.0 else math.log1p((lo - hi) / (1.0 - lo))
    return log_pos, log_neg


def _tv_term(log_ratio, n):
    """``sqrt(1 - ratio**n)`` given ``log(ratio) <= 0``."""
    if log_ratio == -math.inf:
        return 1.0
    return math.sqrt(max(0.0, -math.expm1(n * log_ratio)))


def _check_omega(omega):
    if not (0.5 <= omega <= 1.0):
        raise OmegaOutOfRange(
            f"omega={omega!r} outside [0.5, 1]; flip the predictor before computing n_leaked"
        )


def _log_four_w_one_minus_w(omega):
    t = 2.0 * omega - 1.0
    return math.log1p(-t * t)


@lru_cache(maxsize=4096)
def harmonic(n, s):
    """Generalized harmonic number ``sum_{k=1..n} k**-s``.

    Summed directly with :func:`math.fsum` (correctly rounded), so oracle
    comparisons are not polluted by accumulation error.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, int(n) + 1, dtype=np.float64)
    return math.fsum(k ** (-float(s)))


def binary_accuracy_bound(pair, n):
    """Upper bound on distinguishing accuracy from ``n`` samples of two ratio distributions."""
    p = _as_pair(pair)
    log_pos, log_neg = _log_ratios(p.lo, p.hi)
    return 0.5 + 0.5 * min(_tv_term(log_pos, n), _tv_term(log_neg, n))


def n_leaked_binary(pair, omega):
    """Number of direct samples whose optimal test matches accuracy ``omega``.

    Returns ``math.inf`` for ``omega == 1``. Raises :class:`EqualRatios` if
    the two ratios coincide and :class:`OmegaOutOfRange` for ``omega``
    outside ``[0.5, 1]``.
    """
    p = _as_pair(pair)
    if p.alpha0 == p.alpha1:
        raise EqualRatios("n_leaked is undefined for identical ratios")
    _check_omega(omega)
    if omega == 1.0:
        return math.inf
    log_r = max(_log_ratios(p.lo, p.hi))
    if log_r == -math.inf:
        return 0.0
    if log_r == 0.0:
        # ratios closer than the log1p resolution: any accuracy above chance needs unboundedly many samples
        return 0.0 if omega == 0.5 else math.inf
    return abs(_log_four_w_one_minus_w(omega) / log_r)


def n_leaked_regression(alpha, omega):
    """``alpha (1 - alpha) / omega`` for an observed mean squared error ``omega``."""
    if not (0.0 < alpha < 1.0):
        raise DegenerateAlpha(f"alpha={alpha!r} gives a zero-variance distribution")
    if not omega > 0.0:
        raise NonpositiveError(f"squared error must be positive, got {omega!r}")
    return alpha * (1.0 - alpha) / omega


def zipf_mean(spec):
    """Mean of a finite Zipf law: ``H(N, s - 1) / H(N, s)``."""
    return harmonic(spec.n_elems, spec.exponent - 1.0) / harmonic(spec.n_elems, spec.exponent)


def _zipf_log_ratio(spec0, spec1):
    if spec0.n_elems > spec1.n_elems:
        raise UnorderedSpecs(
            f"expected spec0.n_elems <= spec1.n_elems, got {spec0.n_elems} > {spec1.n_elems}"
        )
    s0, s1 = spec0.exponent, spec1.exponent
    out = math.log(harmonic(spec0.n_elems, s0)) - math.log(harmonic(spec1.n_elems, s1))
    if s1 > s0:
        out += (s0 - s1) * math.log(spec0.n_elems)
    return out


def zipf_accuracy_bound(spec0, spec1, n):
    """Upper bound on distinguishing accuracy for two Zipf laws from ``n`` samples.

    ``spec0`` must have the smaller support; the function refuses to swap.
    """
    log_r = _zipf_log_ratio(spec0, spec1)
    return 0.5 + 0.5 * math.sqrt(max(0.0, -math.expm1(n * log_r)))


def n_leaked_degree(spec0, spec1, omega):
    """``n_leaked`` for Zipf degree distributions at observed accuracy ``omega``."""
    _check_omega(omega)
    denom = _zipf_log_ratio(spec0, spec1)
    if denom == 0.0:
        raise ZeroDenominator("specs are indistinguishable under the Zipf bound")
    if omega == 1.0:
        return math.inf
    return abs(_log_four_w_one_minus_w(omega) / denom)


def kl_bounds_binary(pair):
    """Upper bounds on ``KL(G0 || G1)`` and ``KL(G1 || G0)`` for ratio distributions.

    Returns ``(log(max/min), log((1 - min) / (1 - max)))`` with ``inf`` where
    a denominator vanishes.
    """
    p = _as_pair(pair)
    log_pos, log_neg = _log_ratios(p.lo, p.hi)
    return 0.0 - log_pos, 0.0 - log_neg


def tv_from_kl(d):
    """Total variation bound ``sqrt(1 - exp(-d))`` from a KL divergence ``d``."""
    if d < 0:
        raise ValueError("KL divergence must be nonnegative")
    if math.isinf(d):
        return 1.0
    return math.sqrt(-math.expm1(-d))


def advantage(p_correct_given_b, p_predict_b_given_not_b):
    """Adversary advantage ``|Pr[b_hat | b] - Pr[b_hat | not b]|``."""
    return abs(p_correct_given_b - p_predict_b_given_not_b)
