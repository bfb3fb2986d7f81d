"""Fixed-size trajectory blocks spread over a joblib worker pool.

Block ``b`` always draws from stream ``stream_offset + b`` of the root seed
and blocks are merged in order, so results do not depend on the number of
workers.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from penalized.errors import InvalidParameter
from utils.rng import check_seed, stream_rng
from utils.settings import get_settings

logger = logging.getLogger(__name__)

BlockTask = Callable[[int, int, np.random.Generator], Tuple[np.ndarray, ...]]


def split_blocks(size: int, block_size: int) -> List[Tuple[int, int, int]]:
    """(block index, first particle, particle count) for every block."""
    if size < 1:
        raise InvalidParameter(f"need at least one trajectory, got {size}")
    return [(b, start, min(block_size, size - start)) for b, start in enumerate(range(0, size, block_size))]


def _run_block(task: BlockTask, start: int, count: int, seed: int, stream: int):
    return task(start, count, stream_rng(seed, stream))


def run_blocks(task: BlockTask, size: int, seed: int, workers: Optional[int] = None, block_size: Optional[int] = None, stream_offset: int = 0) -> list:
    settings = get_settings()
    seed = check_seed(seed)
    block_size = block_size or settings.block_size
    workers = workers or settings.workers
    blocks = split_blocks(size, block_size)
    if workers == 1 or len(blocks) == 1:
        return [_run_block(task, start, count, seed, stream_offset + b) for b, start, count in blocks]
    logger.debug("running %d blocks of %d on %d workers", len(blocks), block_size, workers)
    return Parallel(n_jobs=min(workers, len(blocks)))(
        delayed(_run_block)(task, start, count, seed, stream_offset + b) for b, start, count in blocks
    )


def stack_blocks(results: Sequence[Tuple[np.ndarray, ...]]) -> Tuple[np.ndarray, ...]:
    """Concatenate per-block tuples of arrays along the particle axis."""
    return tuple(np.concatenate(parts, axis=0) for parts in zip(*results))
