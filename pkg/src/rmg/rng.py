"""Counter-based random streams.

Every draw is a pure function of ``(seed, key...)``: the key fields are folded
into a 64-bit state with the SplitMix64 finalizer and the result is mapped to a
double in [0, 1).  There is no hidden position, so a draw made from a worker
thread or process is bit-identical to the same draw made serially.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RandomStream", "inverse_cdf"]

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(x) -> np.ndarray:
    if isinstance(x, (int, np.integer)):
        return np.uint64(int(x) & _MASK)
    return np.asarray(x).astype(np.uint64)


class RandomStream:
    """Keyed uniform generator.

    ``stream.child(a, b)`` extends the key prefix; ``stream.uniform(x, y)``
    hashes the prefix plus ``(x, y)`` and broadcasts over array fields.

    >>> s = RandomStream(7)
    >>> s.uniform(1, 2) == RandomStream(7).child(1).uniform(2)
    True
    """

    __slots__ = ("seed", "key", "_state")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        with np.errstate(over="ignore"):
            state = _mix(np.uint64(self.seed & _MASK) + _GOLDEN)
            for depth, field in enumerate(self.key):
                state = _fold(state, np.uint64(field & _MASK), depth)
        self._state = state

    def child(self, *fields: int) -> "RandomStream":
        return RandomStream(self.seed, self.key + tuple(fields))

    def uniform(self, *fields) -> float | np.ndarray:
        """Uniform draw(s) in [0, 1) for the key ``prefix + fields``."""
        depth0 = len(self.key)
        with np.errstate(over="ignore"):
            state = np.asarray(self._state, dtype=np.uint64)
            for offset, field in enumerate(fields):
                state = _fold(state, _as_u64(field), depth0 + offset)
            bits = _mix(state ^ _GOLDEN) >> np.uint64(11)
        out = bits.astype(np.float64) * _INV_2_53
        return float(out) if out.ndim == 0 else out

    def random(self, n: int) -> np.ndarray:
        """``n`` draws indexed by counter ``0..n-1``."""
        return np.asarray(self.uniform(np.arange(n, dtype=np.uint64)), dtype=np.float64).reshape(n)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, key={self.key})"


def _fold(state, field, depth: int):
    salt = np.uint64(((depth + 1) * 0xD1B54A32D192ED03) & _MASK)
    return _mix(state ^ (field * _GOLDEN + salt))


def inverse_cdf(cdf: np.ndarray, u) -> np.ndarray:
    """Sample indices from rows of cumulative sums ``cdf[..., n]`` given uniforms ``u``.

    The index is the number of cumulative entries ``<= u``, clipped to ``n - 1``
    so a last entry rounded below 1 never yields an out-of-range index.
    """
    u = np.asarray(u, dtype=np.float64)
    idx = np.sum(cdf <= u[..., None], axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1)
