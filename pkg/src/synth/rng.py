"""
Counter-based Random Streams
"""

from typing import List

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator; identical seeds give identical streams on every platform."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def substreams(seed: int, n: int) -> List[np.random.Generator]:
    """Independent Philox generators, one per draw or replicate."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(child)) for child in children]
