"""Compare the best possible test against the bound.

The exact binomial likelihood-ratio test is the optimal distinguisher given
n property bits, so its accuracy must sit under the bound. The Zipf version
is Monte-Carlo, so it is compared with a 3-standard-error window.

    python demos/oracle_check.py
"""

from distinf import leakage as lk
from distinf import oracle


def main():
    print(f"{'pair':>12} {'n':>3} {'optimal':>8} {'bound':>8}")
    for pair in [(0.5, 0.6), (0.2, 0.4), (0.0, 0.5)]:
        for n in (1, 5, 20):
            opt = oracle.exact_optimal_accuracy(pair, n)
            print(f"{str(pair):>12} {n:>3} {opt:8.4f} {lk.binary_accuracy_bound(pair, n):8.4f}")

    # the best unbiased ratio estimate from n bits has mse alpha(1-alpha)/n
    print(f"\nexact regression mse, alpha=0.3, n=7: {oracle.exact_regression_mse(0.3, 7):.6f} (0.21/7 = {0.21 / 7:.6f})")

    s0, s1 = lk.ZipfSpec(10, 2.0), lk.ZipfSpec(10, 1.0)
    est = oracle.mc_optimal_accuracy_zipf(s0, s1, 3, trials=40_000, seed=0)
    print(f"\nZipf n=3: mc optimal {est.mean:.4f} +- {3 * est.std_error:.4f}, bound {lk.zipf_accuracy_bound(s0, s1, 3):.4f}")
    print(f"single sample exact: {oracle.exact_optimal_accuracy_zipf_single(s0, s1):.4f}")


if __name__ == "__main__":
    main()
