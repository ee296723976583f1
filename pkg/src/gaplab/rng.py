"""Deterministic PRNG: xoshiro256** seeded through splitmix64.

Both algorithms are bit-exact reproductions of the public-domain reference
implementations by Blackman and Vigna, so any language can replay the
streams from a 64-bit seed. Every source of randomness in gaplab flows
through this module; nothing uses ambient RNG state.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ArgumentError

MASK64 = (1 << 64) - 1

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MUL2 = 0x94D049BB133111EB


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once, returning (new_state, output)."""
    state = (state + _SPLITMIX_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SPLITMIX_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_MUL2) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Sub-seed for an independent stream: output `stream` of splitmix64(seed)."""
    if stream < 0:
        raise ArgumentError(f"stream must be >= 0, got {stream}")
    state = seed & MASK64
    out = 0
    for _ in range(stream + 1):
        state, out = splitmix64_next(state)
    return out


class Rng:
    """xoshiro256** generator with a 256-bit state.

    The four state words are filled from consecutive splitmix64 outputs of
    the 64-bit seed, as recommended by the algorithm's authors. Instances
    are single-owner: the state mutates on every draw and the object is not
    safe for concurrent use.
    """

    __slots__ = ("_s", "_gauss")

    def __init__(self, seed: int):
        state = seed & MASK64
        s = []
        for _ in range(4):
            state, out = splitmix64_next(state)
            s.append(out)
        if not any(s):  # all-zero state would be a fixed point
            s[0] = 1
        self._s = s
        self._gauss: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_float(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def next_below(self, n: int) -> int:
        """Unbiased uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ArgumentError(f"n must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def normal(self) -> float:
        """Standard normal via Box-Muller; the paired draw is cached."""
        if self._gauss is not None:
            z = self._gauss
            self._gauss = None
            return z
        u1 = 1.0 - self.next_float()  # (0, 1] keeps log() finite
        u2 = self.next_float()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=np.float64)

    def uniforms(self, n: int, lo: float, hi: float) -> np.ndarray:
        return np.array([self.uniform(lo, hi) for _ in range(n)], dtype=np.float64)

    def shuffle(self, arr: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(arr) - 1, 0, -1):
            j = self.next_below(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n, dtype=np.int64)
        self.shuffle(idx)
        return idx
