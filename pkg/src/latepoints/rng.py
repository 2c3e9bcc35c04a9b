"""Counter-based random streams for the walk.

A walk with seed ``s`` draws its 64-bit words from SplitMix64 with state
``s``: word ``q`` (``q = 0, 1, ...``) is ``mix64(s + (q + 1) * GOLDEN)``.
Step ``t`` (``t = 1, 2, ...``) consumes the 2-bit field ``(t - 1) % 32`` of
word ``(t - 1) // 32``, least significant bits first. Because every word is
a function of its counter alone, any prefix of the stream can be
regenerated independently and the two kernel backends agree bit for bit.

Replica ``i`` of an experiment with master seed ``m`` uses seed
``mix64(mix64(m ^ REPLICA_TAG) + (i + 1) * GOLDEN)``.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
REPLICA_TAG = 0x6C617465706F696E  # "latepoin"
STEPS_PER_WORD = 32

# direction code -> (dx0, dx1)
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_word(seed: int, q: int) -> int:
    return mix64(seed + (q + 1) * GOLDEN)


def stream_words(seed: int, q0: int, count: int) -> np.ndarray:
    q = np.arange(q0 + 1, q0 + 1 + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + q * np.uint64(GOLDEN)
        return mix64_array(z)


def directions(seed: int, start: int, count: int) -> np.ndarray:
    """Direction codes (0..3) for steps ``start + 1 .. start + count``."""
    s = np.arange(start, start + count, dtype=np.uint64)
    q = s >> np.uint64(5)
    q0 = int(q[0]) if count else 0
    words = stream_words(seed, q0, int(q[-1]) - q0 + 1 if count else 0)
    shift = (s & np.uint64(31)) * np.uint64(2)
    return ((words[(q - np.uint64(q0)).astype(np.intp)] >> shift) & np.uint64(3)).astype(np.uint8)


def replica_seed(master_seed: int, replica: int) -> int:
    if replica < 0:
        raise ValueError("replica index must be >= 0")
    base = mix64(master_seed ^ REPLICA_TAG)
    return mix64(base + (replica + 1) * GOLDEN)


def sampling_rng(seed: int, tag: int = 0) -> np.random.Generator:
    """Generator for auxiliary draws of a run (e.g. picking a late point)."""
    return np.random.default_rng(np.random.SeedSequence([seed & MASK64, 0x5A3F, tag]))
