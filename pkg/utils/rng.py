"""
Seeded random streams

Every random draw in the toolkit comes from a stream keyed by
(seed, stage, *keys), so results do not depend on iteration order or on the
number of worker threads.
"""

import zlib

import numpy as np

RNG_NAME = 'pcg64-seedseq/1'

MAX_SEED = 2 ** 64 - 1


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed"""
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"Seed must be in [0, 2**64), got {seed}")
    return seed


def stream(seed: int, stage: str, *keys: int) -> np.random.Generator:
    """Independent generator for one (seed, stage, keys) triple"""
    stage_id = zlib.crc32(stage.encode('utf-8'))
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=(stage_id, *(int(k) for k in keys)))
    return np.random.Generator(np.random.PCG64(sequence))
