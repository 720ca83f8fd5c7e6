"""Splittable counter-based seeding.

A master seed and a path of labels (strings or integers) identify one random stream:
``SeedSequence(master, spawn_key=path)`` with string labels mapped to their CRC-32. Streams
with different paths are statistically independent, and a stream never depends on how many
other streams were drawn before it, so parallel and serial runs agree.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode())


def seed_sequence(master: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(_key(p) for p in path))


def rng_for(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, *path))


def child_seed(master: int, *path) -> int:
    """A 63-bit integer seed for code that wants a plain int."""
    return int(seed_sequence(master, *path).generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))
