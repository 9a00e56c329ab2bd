"""Deterministic sub-seed derivation.

Randomized steps (subsample repetitions, downsample draws, permutation
batches) each get their own 64-bit seed hashed from the run seed and a
structural position, so results are independent of execution order and
thread count.
"""

import hashlib


def subseed(seed: int, *parts) -> int:
    """Stable 64-bit seed derived from a base seed and position labels."""
    text = repr((int(seed),) + tuple(parts)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")
