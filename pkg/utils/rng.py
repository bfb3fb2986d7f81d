"""Counter-based random streams.

Stream ``s`` of root seed ``r`` is a Philox generator keyed by
``SeedSequence(r, spawn_key=(s,))``: reruns are bit-identical and streams
never overlap, whatever the number of workers.
"""

import numpy as np

MAX_SEED = 2**64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"seed must lie in [0, 2^64), got {seed}")
    return seed


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))


def as_generator(seed) -> np.random.Generator:
    """Accept either a root seed (stream 0) or a ready generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream_rng(seed, 0)
