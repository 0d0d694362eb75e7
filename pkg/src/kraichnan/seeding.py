"""Named, replayable random streams.

Every random draw in the package comes from a generator keyed by a root seed
plus a path of names and indices, e.g. ``rng(seed, "noise", "row", 17)``.
The underlying bit generator is Philox, which is counter based, so streams
with different keys never overlap and can be produced in any order.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _token(part):
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    return zlib.crc32(str(part).encode("utf-8"))


def derive(seed, *path):
    """Return a ``SeedSequence`` for ``seed`` and the derivation ``path``."""
    # the path length is part of the entropy: SeedSequence zero-pads, so
    # ("a",) and ("a", 0) would otherwise collide
    return np.random.SeedSequence([int(seed) & _MASK64, len(path), *(_token(p) for p in path)])


def rng(seed, *path):
    """Generator for the stream named by ``(seed, *path)``."""
    return np.random.Generator(np.random.Philox(derive(seed, *path)))


def child_seed(seed, *path):
    """A 63-bit integer seed derived from ``(seed, *path)``."""
    return int(derive(seed, *path).generate_state(1, np.uint64)[0] >> np.uint64(1))
