"""
Deterministic seeding
Every task draws from SeedSequence([seed, *keys]) so results do not depend on scheduling
"""

import numpy as np


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *(int(k) for k in keys)])


def task_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for one (seed, keys...) task, e.g. (seed, N, replication)"""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys: int) -> int:
    """A 32-bit seed for a derived task, stable across runs and platforms"""
    return int(seed_sequence(seed, *keys).generate_state(1)[0])
