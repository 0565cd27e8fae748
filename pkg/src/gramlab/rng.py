"""Counter-based splitmix64 stream.

Every draw is a pure function of (seed, position), so results do not depend
on the numpy version or on the order in which arrays are requested.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, start: int, n: int) -> np.ndarray:
    """Outputs ``start .. start+n-1`` of the splitmix64 sequence seeded by ``seed``."""
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + idx * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def spawn(self, tag: int) -> "SplitMix64":
        """Independent child stream; ``tag`` distinguishes siblings."""
        child_seed = int(splitmix64(self.seed ^ (0xD1B54A32D192ED03 * (tag + 1) & _MASK), 0, 1)[0])
        return SplitMix64(child_seed)

    def u64(self, n: int) -> np.ndarray:
        out = splitmix64(self.seed, self.counter, n)
        self.counter += n
        return out

    def uniform(self, size=None) -> np.ndarray:
        """Uniform on [0, 1) with 53 random bits."""
        n = int(np.prod(size)) if size is not None else 1
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return u.reshape(size) if size is not None else u[0]

    def normal(self, size) -> np.ndarray:
        """Standard normals via Box-Muller."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape))
        m = (n + 1) // 2
        bits = self.u64(2 * m)
        u1 = ((bits[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (bits[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.u64(n), kind="stable")

    def integers(self, high: int, size) -> np.ndarray:
        """Integers in [0, high)."""
        return np.minimum((self.uniform(size) * high).astype(np.int64), high - 1)
