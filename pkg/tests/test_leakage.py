import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distinf import leakage as lk
from distinf import oracle
from distinf.errors import (
    DegenerateAlpha,
    EqualRatios,
    NonpositiveError,
    OmegaOutOfRange,
    UnorderedSpecs,
    ZeroDenominator,
)

ratios = st.floats(0.0, 1.0, allow_nan=False)
omegas = st.floats(0.5, 1.0, allow_nan=False)


# --- worked examples ---------------------------------------------------------


def test_n_leaked_binary_examples():
    assert lk.n_leaked_binary((0.5, 0.52), 0.95) == pytest.approx(42.34, abs=0.01)
    assert lk.n_leaked_binary((0.2, 0.7), 0.5) == 0.0
    assert lk.n_leaked_binary((0.5, 1.0), 0.95) == pytest.approx(math.log(0.19) / math.log(0.5), rel=1e-12)
    assert lk.n_leaked_binary((0.5, 1.0), 0.95) == pytest.approx(2.3958, abs=2e-4)


def test_n_leaked_binary_edges():
    assert lk.n_leaked_binary((0.3, 0.4), 1.0) == math.inf
    # {0, 1}: a single sample already separates perfectly
    assert lk.n_leaked_binary((0.0, 1.0), 0.9) == 0.0
    assert lk.n_leaked_binary((1.0, 0.0), 1.0) == math.inf
    with pytest.raises(EqualRatios):
        lk.n_leaked_binary((0.4, 0.4), 0.7)
    with pytest.raises(OmegaOutOfRange):
        lk.n_leaked_binary((0.4, 0.5), 0.49)
    with pytest.raises(OmegaOutOfRange):
        lk.n_leaked_binary((0.4, 0.5), 1.01)


def test_ratio_pair_validation():
    with pytest.raises(ValueError):
        lk.RatioPair(-0.1, 0.5)
    with pytest.raises(ValueError):
        lk.RatioPair(0.5, float("nan"))


def test_n_leaked_regression_examples():
    assert lk.n_leaked_regression(0.5, 0.25) == pytest.approx(1.0)
    assert lk.n_leaked_regression(0.5, 0.0025) == pytest.approx(100.0)
    assert lk.n_leaked_regression(0.2, 0.001) == pytest.approx(160.0)
    with pytest.raises(DegenerateAlpha):
        lk.n_leaked_regression(0.0, 0.1)
    with pytest.raises(DegenerateAlpha):
        lk.n_leaked_regression(1.0, 0.1)
    with pytest.raises(NonpositiveError):
        lk.n_leaked_regression(0.3, 0.0)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.5, 0.8])
@pytest.mark.parametrize("n", [1, 5, 40])
def test_n_leaked_regression_inverts_the_oracle(alpha, n):
    assert lk.n_leaked_regression(alpha, oracle.exact_regression_mse(alpha, n)) == pytest.approx(n, rel=1e-10)


def test_zipf_mean_examples():
    assert lk.zipf_mean(lk.ZipfSpec(1, 3.2)) == pytest.approx(1.0)
    assert lk.zipf_mean(lk.ZipfSpec(3, 0.0)) == pytest.approx(2.0)
    assert lk.zipf_mean(lk.ZipfSpec(2, 2.0)) == pytest.approx(1.2)


def test_zipf_mean_monotone_and_bounded():
    for n in (2, 10, 300):
        means = [lk.zipf_mean(lk.ZipfSpec(n, s)) for s in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)]
        assert all(1.0 <= m <= n for m in means)
        assert all(a > b for a, b in zip(means, means[1:]))


def test_harmonic_direct():
    assert lk.harmonic(10, 1.0) == pytest.approx(2.9289682539682538, rel=1e-15)
    assert lk.harmonic(10, 2.0) == pytest.approx(1.5497677311665408, rel=1e-15)
    assert lk.harmonic(5, 0.0) == 5.0


def test_zipf_accuracy_bound_examples():
    assert lk.zipf_accuracy_bound(lk.ZipfSpec(50, 1.0), lk.ZipfSpec(50, 1.0), 5) == 0.5
    a = lk.zipf_accuracy_bound(lk.ZipfSpec(10, 2.0), lk.ZipfSpec(10, 1.0), 1)
    assert a == pytest.approx(0.84311, abs=1e-5)


def test_zipf_accuracy_bound_is_not_symmetric_in_exponents():
    # With equal supports the indicator branch multiplies by N0**(s0 - s1),
    # which does not undo the harmonic ratio; the two orders differ.
    fwd = lk.zipf_accuracy_bound(lk.ZipfSpec(10, 2.0), lk.ZipfSpec(10, 1.0), 1)
    rev = lk.zipf_accuracy_bound(lk.ZipfSpec(10, 1.0), lk.ZipfSpec(10, 2.0), 1)
    ratio = lk.harmonic(10, 1.0) / lk.harmonic(10, 2.0) * 10.0 ** (1.0 - 2.0)
    assert rev == pytest.approx(0.5 + 0.5 * math.sqrt(1 - ratio), rel=1e-12)
    assert rev == pytest.approx(0.950279, abs=1e-6)
    assert fwd != pytest.approx(rev, abs=1e-3)


def test_zipf_requires_ordered_specs():
    with pytest.raises(UnorderedSpecs):
        lk.zipf_accuracy_bound(lk.ZipfSpec(20, 1.0), lk.ZipfSpec(10, 1.0), 3)
    with pytest.raises(UnorderedSpecs):
        lk.n_leaked_degree(lk.ZipfSpec(20, 1.0), lk.ZipfSpec(10, 1.0), 0.7)


def test_n_leaked_degree_examples():
    s0, s1 = lk.ZipfSpec(10, 2.0), lk.ZipfSpec(10, 1.0)
    assert lk.n_leaked_degree(s0, s1, 0.5) == 0.0
    assert lk.n_leaked_degree(s0, s1, lk.zipf_accuracy_bound(s0, s1, 1)) == pytest.approx(1.0, rel=1e-9)
    assert lk.n_leaked_degree(s0, s1, 1.0) == math.inf
    with pytest.raises(ZeroDenominator):
        lk.n_leaked_degree(lk.ZipfSpec(5, 1.0), lk.ZipfSpec(5, 1.0), 0.7)


def test_kl_and_tv_examples():
    assert lk.kl_bounds_binary((0.5, 0.5)) == (0.0, 0.0)
    a, b = lk.kl_bounds_binary((0.25, 0.5))
    assert a == pytest.approx(math.log(2)) and b == pytest.approx(math.log(1.5))
    a, b = lk.kl_bounds_binary((0.0, 0.5))
    assert a == math.inf and b == pytest.approx(math.log(2))
    assert lk.tv_from_kl(0.0) == 0.0
    assert lk.tv_from_kl(math.inf) == 1.0
    assert lk.tv_from_kl(math.log(2)) == pytest.approx(math.sqrt(0.5))


def test_kl_bounds_tiny_gap():
    # ratio-based evaluation would round (1 - 0) / (1 - 1.5e-19) to 1 and report 0
    first, second = lk.kl_bounds_binary((0.0, 1.5e-19))
    assert first == math.inf and second == pytest.approx(1.5e-19, rel=1e-9)
    assert lk.kl_bounds_binary((0.3, 0.3)) == (0.0, 0.0)


def test_advantage_examples():
    assert lk.advantage(1.0, 0.0) == 1.0
    assert lk.advantage(0.5, 0.5) == 0.0
    assert lk.advantage(0.8, 0.3) == pytest.approx(0.5)


def test_report_round_trip_with_inf():
    r = lk.LeakageReport(1.0, 1.0, math.inf, 0.0, 1.0, "meta", 0, 80, None, ["x"], 7, "abc")
    d = r.to_dict()
    assert d["n_leaked"] == "inf"
    assert lk.LeakageReport.from_dict(d) == r


# --- properties ---------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(ratios, ratios, st.integers(1, 200))
def test_bound_symmetries(a0, a1, n):
    b = lk.binary_accuracy_bound((a0, a1), n)
    assert 0.5 <= b <= 1.0
    assert lk.binary_accuracy_bound((a1, a0), n) == b


# 1 - x is exact on a dyadic grid, so the complemented pair is really the complement
dyadic = st.integers(0, 2**40).map(lambda k: k / 2**40)


@settings(max_examples=500, deadline=None)
@given(dyadic, dyadic, st.integers(1, 200))
def test_bound_complement_symmetry(a0, a1, n):
    b = lk.binary_accuracy_bound((a0, a1), n)
    assert lk.binary_accuracy_bound((1 - a0, 1 - a1), n) == pytest.approx(b, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(ratios, ratios, st.integers(1, 100))
def test_bound_monotone_in_n(a0, a1, n):
    assert lk.binary_accuracy_bound((a0, a1), n) <= lk.binary_accuracy_bound((a0, a1), n + 1)


@settings(max_examples=300, deadline=None)
@given(ratios, ratios, omegas, omegas)
def test_n_leaked_monotone_in_omega(a0, a1, w1, w2):
    if a0 == a1:
        return
    lo, hi = sorted((w1, w2))
    assert lk.n_leaked_binary((a0, a1), lo) <= lk.n_leaked_binary((a0, a1), hi)


@settings(max_examples=300, deadline=None)
@given(ratios, ratios, st.integers(1, 50))
def test_bound_sandwich(a0, a1, n):
    b = lk.binary_accuracy_bound((a0, a1), n)
    d = n * min(lk.kl_bounds_binary((a0, a1)))
    assert 0.5 <= b <= 0.5 + 0.5 * lk.tv_from_kl(d) + 1e-12


@settings(max_examples=200, deadline=None)
@given(ratios, ratios, st.integers(1, 20))
def test_bound_dominates_exact_oracle(a0, a1, n):
    assert oracle.exact_optimal_accuracy((a0, a1), n) <= lk.binary_accuracy_bound((a0, a1), n) + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(1, 30))
def test_round_trip_well_conditioned(a0, a1, n):
    # away from the boundary the bound stays clear of 1 and the inversion is exact
    if abs(a0 - a1) < 1e-3:
        return
    w = lk.binary_accuracy_bound((a0, a1), n)
    if w > 1 - 1e-6:
        return
    assert lk.n_leaked_binary((a0, a1), w) == pytest.approx(n, rel=1e-9)
