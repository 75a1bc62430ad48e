"""Seed derivation.

Every random draw in the package goes through numpy's PCG64 bit generator,
seeded from a :class:`numpy.random.SeedSequence` built from a master seed plus
a tuple of integer or string keys.  Strings are mapped to integers with CRC-32
so derived streams are stable across platforms and Python versions.
"""
from __future__ import annotations

import zlib

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 (SeedSequence-derived streams), v1"


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def derive_seed_sequence(seed: int, *keys: int | str) -> np.random.SeedSequence:
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.SeedSequence(entropy)


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *keys)))


def derive_int(seed: int, *keys: int | str) -> int:
    """A 63-bit integer seed for the stream ``(seed, *keys)``."""
    state = derive_seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
