"""Random streams.

Every stream is a numpy ``Generator`` over the Philox4x64 counter-based bit
generator, keyed by ``SeedSequence(master_seed, spawn_key=keys)``. Replica
``i`` of an experiment uses ``stream(seed, ..., i)``, so results never depend
on how replicas are distributed over workers.

Hot loops never call the generator per step; they consume bulk buffers
(``DirectionFeed``) drawn from a stream in fixed-size chunks, which keeps the
consumed sequence independent of how the kernels are invoked.
"""
from __future__ import annotations

import hashlib

import numpy as np

CHUNK = 1 << 20
PRNG_NAME = "numpy.random.Philox (4x64, counter-based) keyed by SeedSequence(master, spawn_key)"


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be non-negative")
        return int(k)
    digest = hashlib.blake2b(str(k).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *keys) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


class DirectionFeed:
    """Chunked supply of uniform walk directions in ``[0, 2d)`` (uint8)."""

    def __init__(self, rng: np.random.Generator, d: int, chunk: int = CHUNK):
        self.rng = rng
        self.n_dirs = 2 * d
        self.chunk = chunk

    def next(self) -> np.ndarray:
        return self.rng.integers(0, self.n_dirs, size=self.chunk, dtype=np.uint8)


class UniformFeed:
    def __init__(self, rng: np.random.Generator, chunk: int = 1 << 16):
        self.rng = rng
        self.chunk = chunk

    def next(self) -> np.ndarray:
        return self.rng.random(self.chunk)
