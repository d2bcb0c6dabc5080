import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; the same seed always yields the same draw sequence."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def spawn_rngs(seed: int, count: int) -> list:
    """Independent child streams (data, init, shuffling, ...) from one seed."""
    children = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]
