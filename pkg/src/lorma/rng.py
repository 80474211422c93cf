"""Portable, seedable random number generation.

The generator is xoshiro256** with its 256-bit state filled from a 64-bit
seed by splitmix64. Everything is done with Python integers, so a given
seed yields the same stream on every platform and numpy version. Normal
variates use the Box-Muller transform and consume exactly two uniforms
each; the second Box-Muller output is discarded so that stream position
is a simple function of the number of draws.
"""

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi


def splitmix64(state):
    """One splitmix64 step. Returns ``(next_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256:
    """xoshiro256** generator.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed. Negative or oversized values are rejected.
    """

    def __init__(self, seed=0):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        sm = seed
        state = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            state.append(out)
        self._s = state

    @property
    def state(self):
        return tuple(self._s)

    def next_u64(self):
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self, mean=0.0, std=1.0):
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
        return mean + std * z

    def integer(self, n):
        """Unbiased integer in ``range(n)`` by rejection sampling."""
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def normal_matrix(self, rows, cols, std=1.0):
        data = [std * self.normal() for _ in range(rows * cols)]
        return np.array(data, dtype=np.float64).reshape(rows, cols)

    def uniform_matrix(self, rows, cols, low=0.0, high=1.0):
        width = high - low
        data = [low + width * self.uniform() for _ in range(rows * cols)]
        return np.array(data, dtype=np.float64).reshape(rows, cols)

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integer(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def spawn(self):
        """Independent child generator seeded from this stream."""
        return Xoshiro256(self.next_u64())


def check_random_state(seed):
    """Turn ``seed`` into a :class:`Xoshiro256` instance.

    ``None`` maps to seed 0 so that runs stay reproducible by default.
    """
    if seed is None:
        return Xoshiro256(0)
    if isinstance(seed, Xoshiro256):
        return seed
    return Xoshiro256(seed)
