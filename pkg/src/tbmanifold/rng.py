"""Seeding.

All randomness flows through :class:`numpy.random.Generator` backed by
PCG64 (permuted congruential generator, 128-bit state, seeded from a 64-bit
integer through numpy's SeedSequence).

Child seeds are derived with a hash chain so any single stage of a sweep can
be reproduced in isolation::

    child = blake2b(digest_size=8, key=b"tbmanifold")(
        parent.to_bytes(8, "little") + b"\\x1f" + repr(key).encode())

interpreted as an unsigned little-endian 64-bit integer.  Chaining keys
``derive_seed(master, "spiral", 3, "fit")`` applies the hash once per key.
"""

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def derive_seed(parent, *keys):
    """Fold ``keys`` into ``parent`` one at a time, returning a 64-bit seed."""
    seed = int(parent) & _MASK
    for key in keys:
        h = hashlib.blake2b(digest_size=8, key=b"tbmanifold")
        h.update(seed.to_bytes(8, "little"))
        h.update(b"\x1f")
        h.update(repr(key).encode("utf-8"))
        seed = int.from_bytes(h.digest(), "little")
    return seed


def make_rng(seed):
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
