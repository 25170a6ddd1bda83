from __future__ import annotations

from typing import List

import numpy as np

# Child stream slots under a run's SeedSequence.
ASSIGNMENT_STREAM = 0
PROTOCOL_STREAM = 1


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def run_streams(seed: int) -> List[np.random.Generator]:
    """
    Split one run seed into independent generators.
    Slot ASSIGNMENT_STREAM draws class membership only, so every command
    sees the same assignment for a given seed.
    """
    children = np.random.SeedSequence(seed).spawn(2)
    return [make_rng(c) for c in children]


def assignment_rng(seed: int) -> np.random.Generator:
    return run_streams(seed)[ASSIGNMENT_STREAM]


def protocol_rng(seed: int) -> np.random.Generator:
    return run_streams(seed)[PROTOCOL_STREAM]
