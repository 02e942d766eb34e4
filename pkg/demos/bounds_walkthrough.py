"""How much does a distinguishing accuracy say about leakage?

Walks through the accuracy bound and its inverse, n_leaked, for a few
ratio pairs, then does the same for Zipf degree laws.

    python demos/bounds_walkthrough.py
"""

from distinf import leakage as lk


def main():
    print("accuracy bound for telling alpha0 from alpha1 given n samples")
    print(f"{'pair':>14} " + " ".join(f"n={n:<5}" for n in (1, 10, 100, 1000)))
    for pair in [(0.5, 0.52), (0.5, 0.6), (0.2, 0.8), (0.0, 0.1)]:
        row = " ".join(f"{lk.binary_accuracy_bound(pair, n):<7.4f}" for n in (1, 10, 100, 1000))
        print(f"{str(pair):>14} {row}")

    # an attack that reaches 95% on a 2-point ratio gap is worth ~42 samples
    print()
    for w in (0.6, 0.8, 0.95, 0.99):
        print(f"omega={w:<5} on (0.5, 0.52) -> n_leaked = {lk.n_leaked_binary((0.5, 0.52), w):8.2f}")

    # inverting the bound gives back n, as long as the bound is not pinned near 1
    n = 17
    w = lk.binary_accuracy_bound((0.3, 0.45), n)
    print(f"\nround trip at n={n}: bound {w:.6f} -> n_leaked {lk.n_leaked_binary((0.3, 0.45), w):.9f}")

    # regression form: an estimator with mse 0.0025 at alpha 0.5 is worth 100 samples
    print(f"regression: alpha=0.5, mse=0.0025 -> n_leaked = {lk.n_leaked_regression(0.5, 0.0025):.1f}")

    print("\nZipf degree laws (support 10)")
    s0, s1 = lk.ZipfSpec(10, 2.0), lk.ZipfSpec(10, 1.0)
    print(f"means: s=2 -> {lk.zipf_mean(s0):.3f}, s=1 -> {lk.zipf_mean(s1):.3f}")
    for n in (1, 3, 10):
        print(f"n={n:<3} bound {lk.zipf_accuracy_bound(s0, s1, n):.5f}")
    # the bound is not symmetric in the order of the specs
    print(f"reversed order, n=1: {lk.zipf_accuracy_bound(s1, s0, 1):.5f}")


if __name__ == "__main__":
    main()
