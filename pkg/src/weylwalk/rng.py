"""Counter-based random streams (Philox4x64-10).

A stream is fully determined by ``(seed, index, substream)``.  Word ``w`` of
a stream is lane ``w % 4`` of the Philox block encrypted from the counter
``(w // 4, index, substream, 0)`` under the key ``(seed mod 2^64, seed >> 64)``.
Any word can therefore be produced without touching the others, which makes
Monte Carlo output independent of how trajectories are split across
workers.  The block function is bit-compatible with ``numpy.random.Philox``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RandomStream", "philox4x64", "key_from_seed", "words_to_uniform", "uniforms_to_normal"]

MASK64 = (1 << 64) - 1
_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_MUL0 = 0xD2E7470EE14C6C93
_MUL1 = 0xCA5A826395121157
_WEYL0 = 0x9E3779B97F4A7C15
_WEYL1 = 0xBB67AE8584CAA73B
_ROUNDS = 10


def _mulhilo(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    # 64x64 -> 128 bit product from 32-bit limbs; every partial sum fits in uint64
    m_lo = np.uint64(m & 0xFFFFFFFF)
    m_hi = np.uint64(m >> 32)
    a_lo = a & _M32
    a_hi = a >> _S32
    ll = a_lo * m_lo
    hl = a_hi * m_lo
    lh = a_lo * m_hi
    hh = a_hi * m_hi
    t = hl + (ll >> _S32)
    w1 = (t & _M32) + lh
    hi = hh + (t >> _S32) + (w1 >> _S32)
    lo = a * np.uint64(m)
    return hi, lo


def philox4x64(c0, c1, c2, c3, k0: int, k1: int):
    """Vectorised Philox4x64-10 block function.

    Counter words may be scalars or broadcastable uint64 arrays.  Returns
    the four output words as uint64 arrays.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(
        *(np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    )
    c0, c1, c2, c3 = (np.array(c, dtype=np.uint64, copy=True) for c in (c0, c1, c2, c3))
    key0, key1 = k0 & MASK64, k1 & MASK64
    with np.errstate(over="ignore"):
        for _ in range(_ROUNDS):
            hi0, lo0 = _mulhilo(c0, _MUL0)
            hi1, lo1 = _mulhilo(c2, _MUL1)
            c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(key0), lo1, hi0 ^ c3 ^ np.uint64(key1), lo0
            key0 = (key0 + _WEYL0) & MASK64
            key1 = (key1 + _WEYL1) & MASK64
    return c0, c1, c2, c3


def key_from_seed(seed: int) -> tuple[int, int]:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return seed & MASK64, (seed >> 64) & MASK64


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in [0, 1) using the top 53 bits."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def uniforms_to_normal(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Box-Muller (cosine branch); ``u1`` in [0, 1) is flipped to (0, 1]."""
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def block_words(seed: int, index, substream: int, word_index: int) -> np.ndarray:
    """Word ``word_index`` of the streams ``index`` (scalar or array)."""
    k0, k1 = key_from_seed(seed)
    block, lane = divmod(int(word_index), 4)
    out = philox4x64(block, index, substream, 0, k0, k1)
    return out[lane]


@dataclass(frozen=True)
class RandomStream:
    """Single-trajectory stream keyed by ``(seed, index, substream)``."""

    seed: int = 0
    index: int = 0
    substream: int = 0

    def words(self, start: int, count: int) -> np.ndarray:
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        k0, k1 = key_from_seed(self.seed)
        b0 = start // 4
        b1 = (start + count - 1) // 4
        blocks = np.arange(b0, b1 + 1, dtype=np.uint64)
        out = philox4x64(blocks, self.index, self.substream, 0, k0, k1)
        flat = np.stack(out, axis=1).reshape(-1)
        off = start - 4 * b0
        return flat[off : off + count]

    def uniforms(self, start: int, count: int) -> np.ndarray:
        return words_to_uniform(self.words(start, count))

    def normals(self, start: int, count: int) -> np.ndarray:
        """``count`` standard normals from words ``start .. start + 2*count``."""
        u = self.uniforms(start, 2 * count)
        return uniforms_to_normal(u[0::2], u[1::2])

    def child(self, index: int) -> "RandomStream":
        """Stream of another trajectory under the same seed and substream."""
        return RandomStream(self.seed, index, self.substream)

    def split(self, substream: int) -> "RandomStream":
        return RandomStream(self.seed, self.index, substream)
