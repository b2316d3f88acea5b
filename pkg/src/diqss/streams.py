"""Counter-based per-round random streams.

Round ``i`` of a run seeded with ``seed`` owns words ``[i*K, (i+1)*K)`` of the
Philox stream keyed by ``seed``. A round's randomness therefore depends only on
``(seed, i)``, whether it is drawn alone or as part of a vectorised block.
"""
from __future__ import annotations

import numpy as np

WORDS_PER_ROUND = 8
_COUNTERS_PER_ROUND = WORDS_PER_ROUND // 4  # Philox4x64 emits 4 words per counter step
_INV_2_53 = 1.0 / (1 << 53)

SEED_LIMIT = 1 << 64


class StreamExhausted(RuntimeError):
    pass


def check_seed(seed: int) -> int:
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def round_words(seed: int, start: int, count: int) -> np.ndarray:
    """Raw words for rounds ``start .. start+count-1``, shape ``(count, K)``."""
    bg = np.random.Philox(key=check_seed(seed), counter=start * _COUNTERS_PER_ROUND)
    return bg.random_raw(count * WORDS_PER_ROUND).reshape(count, WORDS_PER_ROUND)


class RoundStream:
    """A finite stream of uniforms exposing the subset of the numpy
    ``Generator`` API the simulator uses (``random`` and ``integers``)."""

    __slots__ = ("_words", "_pos")

    def __init__(self, words) -> None:
        self._words = [int(w) for w in words]
        self._pos = 0

    @classmethod
    def for_round(cls, seed: int, index: int) -> RoundStream:
        return cls(round_words(seed, index, 1)[0])

    def _next(self) -> int:
        if self._pos >= len(self._words):
            raise StreamExhausted("round consumed more than its word budget")
        w = self._words[self._pos]
        self._pos += 1
        return w

    def random(self) -> float:
        return (self._next() >> 11) * _INV_2_53

    def integers(self, low: int, high: int | None = None) -> int:
        if high is None:
            low, high = 0, low
        span = high - low
        if span <= 0:
            raise ValueError("empty integer range")
        return low + ((self._next() >> 11) * span >> 53)
