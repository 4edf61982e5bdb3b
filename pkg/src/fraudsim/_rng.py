"""Counter-based seed derivation.

Every stochastic stream in the package is keyed by ``(master_seed, *counters)``
so results do not depend on scheduling or worker count.
"""
import numpy as np


def derive_seed(master_seed, *keys):
    """Return a 64-bit seed determined by ``master_seed`` and integer ``keys``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF))
