"""Deterministic random streams.

Every sampler in the package takes an explicit :class:`numpy.random.Generator`.
Independent streams are derived from a 64-bit master seed and a stream index,
so replicated runs replay bit-for-bit regardless of how work is sharded.
"""

import numpy as np

DEFAULT_SEED = 20240917


def stream(seed, index=0):
    """Return the generator for stream ``index`` under master ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def streams(seed, count, offset=0):
    return [stream(seed, offset + i) for i in range(count)]


def derive_seed(seed, *keys):
    """64-bit child seed for a named sub-task, e.g. ``derive_seed(seed, 3, 1)``."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)
    return int(state[0])
