"""Counter-based random streams.

Every stream is identified by a 64-bit key. Draw number ``c`` of a stream is
the ``c``-th output of SplitMix64 seeded with the key::

    u(key, c) = (mix64(key + (c + 1) * GOLDEN) >> 11) * 2**-53

so any draw can be computed directly from (key, counter) and streams never
share mutable state. Child keys are derived the same way:
``child(key, i) = mix64(mix64(key + (i + 1) * GOLDEN) ^ SALT)``. A simulation
replication uses ``child(base_seed, replication)`` and each processor in it
uses ``child(replication_key, processor)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(uint64(uint64), cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True)
def uniform_at(key, counter):
    """Draw ``counter`` of stream ``key`` as a float in [0, 1)."""
    z = mix64(uint64(key) + (uint64(counter) + uint64(1)) * GOLDEN)
    return float(z >> uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def child_key(key, index):
    return mix64(mix64(uint64(key) + (uint64(index) + uint64(1)) * GOLDEN) ^ SALT)


def as_key(seed: int) -> np.uint64:
    """Map any Python integer seed onto a 64-bit key."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


class Stream:
    """Sequential view of one counter-based stream."""

    def __init__(self, key, counter: int = 0):
        self.key = as_key(key)
        self.counter = counter

    def uniform(self) -> float:
        u = uniform_at(self.key, np.uint64(self.counter))
        self.counter += 1
        return u

    def child(self, index: int) -> "Stream":
        return Stream(child_key(self.key, np.uint64(index)))


def replication_key(base_seed: int, replication: int) -> np.uint64:
    return child_key(as_key(base_seed), np.uint64(replication))


def processor_key(rep_key, processor: int) -> np.uint64:
    return child_key(np.uint64(rep_key), np.uint64(processor))
