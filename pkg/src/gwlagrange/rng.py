"""Seedable SplitMix64 streams.

``SplitMix64(seed)`` exposes ``random(size)`` like ``numpy.random.Generator``
so it can be passed wherever the samplers expect an ``rng``.  Draw ``j`` of
the stream is ``kernels.uniforms(seed, j)``, so a stream can be replayed from
any offset without generating the prefix.
"""
from __future__ import annotations

import numpy as np

from . import kernels


class SplitMix64:
    name = "splitmix64"

    def __init__(self, seed: int, offset: int = 0):
        self.seed = int(seed) % (1 << 64)
        self.counter = int(offset)

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = kernels.uniforms(np.uint64(self.seed), np.arange(self.counter, self.counter + n))
        self.counter += n
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def spawn_key(self, index: int) -> int:
        """Key of sub-stream ``index`` (the per-tree keys of the simulators)."""
        return int(kernels.tree_keys(self.seed, index, 1)[0])

    def __repr__(self):
        return f"SplitMix64(seed={self.seed}, counter={self.counter})"
