"""Seeding helpers.

All randomness flows from an integer master seed. Replicate ``k`` of an
experiment gets the stream ``SeedSequence(master, spawn_key=(k,))``, so a
replicate's draws do not depend on which worker runs it or in what order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

RandomSeed = Union[None, int, np.random.SeedSequence, np.random.Generator]


def as_generator(seed: RandomSeed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        # no ambient entropy: an absent seed means seed 0
        seed = 0
    return np.random.default_rng(seed)


def replicate_sequence(master_seed: int, k: int, *stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(k), *map(int, stream)))


def replicate_generator(master_seed: int, k: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replicate_sequence(master_seed, k, *stream)))
