"""Seed discipline: every random stream is a pure function of (seed, keys).

Streams are Philox counter-based generators keyed through ``SeedSequence``,
so trial ``t`` draws the same numbers no matter which worker runs it or in
what order.
"""

import zlib

import numpy as np

# Stream tags keep independent purposes from ever sharing a key path.
DICTIONARY = 1
COSUPPORT = 2
SIGNAL = 3
NOISE = 4
SUBSETS = 5
MIXING = 6


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


def rng(seed, *keys) -> np.random.Generator:
    """Independent generator for the stream addressed by ``(seed, *keys)``."""
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence([_key(seed), *(_key(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))


def subseed(seed, *keys) -> int:
    """A 63-bit integer seed derived from ``(seed, *keys)``, for record keeping."""
    ss = np.random.SeedSequence([_key(seed), *(_key(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
