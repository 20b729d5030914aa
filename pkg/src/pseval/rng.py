"""Deterministic, key-addressed randomness.

Every random decision in the pipeline (split selection, noise assignment,
SNR draws, noise offsets) comes from a counter-based generator keyed by a
stable hash of (master_seed, *string/int parts). Draws therefore do not
depend on evaluation order or thread count, and never on wall-clock state.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_U64 = (1 << 64) - 1


def _digest(master_seed: int, parts: tuple, size: int) -> bytes:
    h = hashlib.blake2b(digest_size=size)
    h.update(struct.pack("<Q", master_seed & _U64))
    for part in parts:
        if isinstance(part, (int, np.integer)):
            enc = b"i" + int(part).to_bytes(16, "little", signed=True)
        elif isinstance(part, str):
            enc = b"s" + part.encode("utf-8")
        else:
            raise TypeError(f"rng key parts must be str or int, got {type(part).__name__}")
        h.update(struct.pack("<I", len(enc)))
        h.update(enc)
    return h.digest()


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit seed for (master_seed, *parts)."""
    return int.from_bytes(_digest(master_seed, parts, 8), "little")


def keyed_generator(master_seed: int, *parts) -> np.random.Generator:
    """Philox generator keyed by a 128-bit hash of (master_seed, *parts)."""
    key = int.from_bytes(_digest(master_seed, parts, 16), "little")
    return np.random.Generator(np.random.Philox(key=key))


def generator_from_seed(seed: int) -> np.random.Generator:
    """Philox generator for an already-derived 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _U64))
