"""Reproducible random streams.

Every stream is a Philox counter-based generator keyed by the 128-bit pair
``(base_seed, stream_id)``, so a stream's samples depend on nothing but that
pair and distinct stream ids never share a keystream.
"""
from dataclasses import dataclass

import numpy as np

MASK_64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_seed", int(self.base_seed) & MASK_64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & MASK_64)

    @property
    def key(self):
        return (self.stream_id << 64) | self.base_seed

    def generator(self):
        return np.random.Generator(np.random.Philox(key=self.key))

    def substream(self, stream_id):
        return RngStream(self.base_seed, stream_id)
