"""Seeded random streams.

All randomness comes from numpy's Philox4x64 counter-based generator. A
stream is identified by ``(seed, *key)``: the key becomes the ``spawn_key``
of a :class:`numpy.random.SeedSequence`, so distinct keys give statistically
independent streams and the same key always replays the same stream.

Key conventions used across the package:

* pruning layer ``i``, attempt ``a``: ``(seed, i, a)``
* sweep instance / queries: ``(master_seed, 0)`` / ``(master_seed, 1)``
* sweep trial: ``(master_seed, 2, method_code, budget, trial)``
"""
from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64"


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
