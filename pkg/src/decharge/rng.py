"""Seed derivation.

Every random stream is derived from the master seed through numpy's
``SeedSequence`` spawn keys, so any (day, window, repetition) cell can be
reproduced in isolation::

    master seed --(STREAM, day, window, repetition, ...)--> Generator

Streams are small integers so unrelated consumers never share a sequence.
"""

import numpy as np

PLACEMENT = 1
OUTAGE = 2
TREE = 3
COHDA_ORDER = 4
ADVERSARY = 5
HISTORY = 6
STATIONS = 7
START = 8


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator for ``seed`` and a tuple of spawn keys."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(seq)
