"""Counter-based random streams.

Every path draws from its own Philox stream addressed by
``(master_seed, stream_index)``, so a sample never depends on chunking or on
how many workers produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

#: Streams reserved per :meth:`Seed.block`; large enough for any single stage.
STREAM_BLOCK = 1 << 40


@dataclass(frozen=True)
class Seed:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_index < 0:
            raise ValueError(f"stream_index must be nonnegative, got {self.stream_index}")

    def offset(self, k: int) -> Seed:
        return Seed(self.master_seed, self.stream_index + k)

    def block(self, i: int) -> Seed:
        """Seed for the ``i``-th disjoint block of :data:`STREAM_BLOCK` streams."""
        return Seed(self.master_seed, self.stream_index + i * STREAM_BLOCK)


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


class StreamNormals:
    """Draws standard normals for a contiguous range of streams.

    Stream ``j`` starts from Philox counter ``j << 128`` under key
    ``master_seed``, which leaves 2**128 draws per stream.
    """

    def __init__(self, seed):
        seed = as_seed(seed)
        self.seed = seed
        self._bitgen = np.random.Philox(key=seed.master_seed)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def _reset(self, stream: int) -> None:
        st = self._state
        counter = st["state"]["counter"]
        counter[0] = 0
        counter[1] = 0
        counter[2] = stream & _MASK64
        counter[3] = (stream >> 64) & _MASK64
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bitgen.state = st

    def generator(self, k: int) -> np.random.Generator:
        """Generator positioned at the start of stream ``seed.stream_index + k``."""
        self._reset(self.seed.stream_index + k)
        return self._gen

    def fill(self, start: int, count: int, size: int, out=None) -> np.ndarray:
        """Array of shape ``(count, size)``; row ``i`` comes from stream ``start + i``."""
        if out is None:
            out = np.empty((count, size))
        for i in range(count):
            self._reset(self.seed.stream_index + start + i)
            self._gen.standard_normal(out=out[i])
        return out

    def uniforms(self, start: int, count: int, size: int) -> np.ndarray:
        out = np.empty((count, size))
        for i in range(count):
            self._reset(self.seed.stream_index + start + i)
            self._gen.random(out=out[i])
        return out


def generator(seed) -> np.random.Generator:
    """Plain generator on stream ``seed.stream_index`` (bootstrap, oracles)."""
    return StreamNormals(seed).generator(0)
