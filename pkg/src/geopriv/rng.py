"""Reproducible counter-based random streams.

Streams are Philox sequences keyed by a (seed, stream index) pair; distinct
pairs yield statistically independent sequences, and a stream is fully
determined by its pair. Philox produces uniform doubles in counter blocks of
four, which gives cheap per-trial sub-streams: trial k of an experiment reads
exactly counter block k (doubles 4k..4k+3), whether the block is generated in
isolation or as row k of one big batched draw. That equivalence is what makes
experiment output independent of execution order and worker count.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4  # uniform doubles per Philox counter block

_MASK64 = (1 << 64) - 1


class RandomStream:
    """A single-owner, consumable stream of uniform variates."""

    def __init__(self, seed: int, index: int = 0, start_block: int = 0):
        self.seed = int(seed) & _MASK64
        self.index = int(index) & _MASK64
        self.start_block = int(start_block)
        self._gen = np.random.Generator(
            np.random.Philox(key=[self.seed, self.index], counter=[self.start_block, 0, 0, 0])
        )
        self._consumed = 0

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, index={self.index}, start_block={self.start_block})"

    @property
    def blocks_consumed(self) -> int:
        """Whole counter blocks consumed so far (relative to start_block)."""
        return self._consumed // BLOCK

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy Generator.

        Draws made directly on it advance the stream but are not tracked, so
        block alignment guarantees of ``blocks`` no longer apply afterwards.
        """
        return self._gen

    def at_block(self, k: int) -> "RandomStream":
        """A fresh stream over the same sequence, positioned at counter block k."""
        return RandomStream(self.seed, self.index, start_block=k)

    def uniforms(self, n: int) -> np.ndarray:
        """Consume the next n uniform doubles in [0, 1)."""
        out = self._gen.random(n)
        self._consumed += n
        return out

    def blocks(self, n_items: int, width: int = BLOCK) -> np.ndarray:
        """Consume n_items whole counter blocks; row k is block k of the stream.

        Returns the first ``width`` doubles of each block as an
        (n_items, width) array. Requires the stream to be block-aligned,
        i.e. only whole blocks were consumed so far.
        """
        if not 1 <= width <= BLOCK:
            raise ValueError(f"width must be in [1, {BLOCK}]")
        if self._consumed % BLOCK != 0:
            raise RuntimeError("stream is not block-aligned; cannot hand out whole blocks")
        flat = self._gen.random(n_items * BLOCK)
        self._consumed += n_items * BLOCK
        return flat.reshape(n_items, BLOCK)[:, :width]
