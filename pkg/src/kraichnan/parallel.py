"""Block-parallel Monte Carlo with results that do not depend on thread count.

Work is cut into blocks of a fixed size; block ``b`` draws from its own named
stream and results are concatenated in block order.  The number of threads
only changes which worker evaluates a block, never what it computes.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 4096
_threads = 1


def set_threads(n):
    global _threads
    if int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads():
    return _threads


def block_sizes(n, block=BLOCK_SIZE):
    full, rest = divmod(int(n), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn, n, block=BLOCK_SIZE):
    """Evaluate ``fn(block_index, size)`` over blocks covering ``n`` items.

    ``fn`` returns an array whose first axis has length ``size``; the blocks
    are concatenated in order.
    """
    sizes = block_sizes(n, block)
    if _threads == 1 or len(sizes) == 1:
        parts = [fn(b, s) for b, s in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(fn, range(len(sizes)), sizes))
    return np.concatenate(parts, axis=0)
