"""Deterministic named RNG substreams derived from one master seed.

Every source of randomness (topology, utilities, availability, epsilon,
deviations, ...) draws from its own named stream so components can be
varied independently and runs are reproducible bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(master_seed: int, *names: object) -> np.random.Generator:
    entropy = [int(master_seed) & 0xFFFFFFFF]
    for name in names:
        entropy.append(zlib.crc32(str(name).encode("utf8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))
