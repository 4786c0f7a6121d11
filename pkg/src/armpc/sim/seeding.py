"""Deterministic stream splitting for parallel simulation tasks.

Every random draw in the harness flows from one 64-bit seed through a
counter-based generator; independent tasks get disjoint streams keyed
by their position, so fan-out order never changes the results.
"""

import numpy as np

__all__ = ["make_rng"]


def make_rng(seed, *path):
    """Independent generator for the task addressed by `path`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))
