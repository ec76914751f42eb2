"""Seeded, splittable random streams.

Every stochastic step in the package (weight init, masking, mask fill,
dropout, shuffling, synthetic data) draws from an :class:`Rng`.  Streams are
Philox (counter-based) generators keyed by a ``SeedSequence``; child streams
are derived from a key path, so adding a new consumer never shifts the draws
seen by existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *coords) -> int:
    """Stable 64-bit seed from a global seed and arbitrary coordinates.

    Used for per-cell sweep seeds: ``derive_seed(seed, "mask", 0.75, 1)``.
    Coordinates are hashed through their ``repr`` so floats and strings work.
    """
    payload = repr((int(seed),) + tuple(coords)).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    digest = hashlib.sha256(repr(part).encode()).digest()
    return int.from_bytes(digest[:4], "little")


class Rng:
    """A reproducible random stream.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    key : tuple
        Spawn-key path; use :meth:`child` rather than passing this directly.
    """

    def __init__(self, seed: int, key: tuple = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.key = tuple(key)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key_int(k) for k in self.key))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *key) -> "Rng":
        """Independent stream derived from this stream's seed and key path."""
        return Rng(self.seed, self.key + tuple(key))

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"

    # thin wrappers so call sites never touch numpy's generator directly

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def random(self, size=None, dtype=np.float64):
        return self._gen.random(size, dtype=dtype)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)
