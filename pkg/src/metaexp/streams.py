"""Deterministic random stream derivation.

Every random draw in a run comes from a numpy Philox generator whose key is
derived from the master seed by a documented 64-bit mixing chain, so results
are reproducible bit-for-bit and independent of execution schedule.

Mixing function (splitmix64 finalizer, all arithmetic mod 2**64)::

    splitmix64(x):
        x = x + 0x9E3779B97F4A7C15
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
        x = (x ^ (x >> 27)) * 0x94D049BB133111EB
        return x ^ (x >> 31)

    mix64(a, b) = splitmix64(splitmix64(a) ^ b)

Replication r of a run with master seed s uses ``mix64(s, r)`` as its root;
sub-streams extend the chain with a purpose tag and an index, e.g. the
traffic stream of experiment i is keyed by
``mix64(mix64(root, TRAFFIC), i)``. For a fixed prefix, ``mix64`` is a
bijection in its second argument, so sibling streams always get distinct
Philox keys; distinct Philox keys yield statistically independent streams by
construction of the generator.
"""

import numpy as np

_MASK = (1 << 64) - 1

# Sub-stream purpose tags.
FLEET = 1
TRAFFIC = 2
RESPONSE = 3
ASSIGN = 4
DRIFT = 5


def splitmix64(x: int) -> int:
    """One splitmix64 finalizer step (input and output are u64)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix64(a: int, b: int) -> int:
    """Mix two u64 values into a child seed."""
    return splitmix64(splitmix64(a & _MASK) ^ (b & _MASK))


def derive_key(seed: int, *path: int) -> int:
    """Fold a path of tags/indices onto a seed with ``mix64``."""
    key = seed & _MASK
    for part in path:
        key = mix64(key, part)
    return key


def generator(seed: int, *path: int) -> np.random.Generator:
    """Philox generator keyed by ``derive_key(seed, *path)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *path)))
