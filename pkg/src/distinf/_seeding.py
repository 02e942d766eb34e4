"""64-bit seed mixing.

All derived seeds in the package go through :func:`mix`, a chained
splitmix64 finalizer. The constants are fixed so that seeds (and therefore
every generated dataset and model) are identical across machines.
"""

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    """splitmix64 finalizer on a Python int (taken mod 2**64)."""
    z = (x + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def mix(*words):
    """Fold any number of integers into one 64-bit seed."""
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK))
    return h


def splitmix64_array(x):
    """Vectorized splitmix64 over a ``uint64`` array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def mix_array(seed, indices):
    """``mix(seed, i)`` for every ``i`` in ``indices`` (vectorized)."""
    base = np.uint64(splitmix64(int(seed) & MASK))
    return splitmix64_array(base ^ np.asarray(indices, dtype=np.uint64))


def uniforms(keys, count):
    """``count`` open-interval uniforms per key, shape ``(len(keys), count)``.

    Each value depends only on its key and column, so appending keys never
    changes earlier rows.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    cols = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GOLDEN)
    bits = splitmix64_array(keys[:, None] ^ cols[None, :])
    # top 53 bits, shifted half a step off zero
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(keys, count):
    """Standard normals per key via Box-Muller, shape ``(len(keys), count)``."""
    pairs = (count + 1) // 2
    u = uniforms(keys, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    theta = 2.0 * np.pi * u[:, 1::2]
    z = np.empty((len(u), 2 * pairs))
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z[:, :count]
