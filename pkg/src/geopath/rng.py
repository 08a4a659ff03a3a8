"""Counter-based random streams.

Every variate is a pure function of ``(seed, stream, index)``: a SplitMix64
finalizer hashes the triple, so draws for index ``j`` never depend on how
many other indices were drawn, in what order, or on which thread.
"""

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_id(name):
    """Stable 64-bit id for a named substream."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def random_bits(seed, stream, index):
    """Hash ``(seed, stream, index)`` to uniformly distributed uint64 words."""
    seed = check_seed(seed)
    index = np.atleast_1d(np.asarray(index, dtype=np.uint64))
    with np.errstate(over="ignore"):
        key = _mix(np.array([seed ^ (int(stream) & _MASK64)], dtype=np.uint64) + _GOLDEN)
        return _mix(key ^ _mix((index + np.uint64(1)) * _GOLDEN))


def uniform(seed, stream, index):
    """Uniform doubles strictly inside ``(0, 1)``."""
    bits = random_bits(seed, stream, index)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def standard_normal(seed, stream, index):
    """Standard normal variates by Box-Muller on two derived substreams."""
    u1 = uniform(seed, stream_id(f"{stream}:bm-radius"), index)
    u2 = uniform(seed, stream_id(f"{stream}:bm-angle"), index)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
