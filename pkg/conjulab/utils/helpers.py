"""
Utility functions for the conjugacy laboratory.
conjulab/utils/helpers.py
"""

import asyncio
import time
from typing import Any, Callable, List, Optional

import numpy as np
from loguru import logger

from conjulab.model.vectorspace import DenseVector, SparseVector, SpaceFamily, Vector


class Stopwatch:
    """Wall-clock timer usable as a context manager."""

    def __init__(self):
        self.start: Optional[float] = None
        self.elapsed = 0.0

    def __enter__(self) -> "Stopwatch":
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self.start


def batch_list(items: List[Any], batch_size: int) -> List[List[Any]]:
    """
    Split list into batches.

    Args:
        items: List of items
        batch_size: Size of each batch

    Returns:
        List of batches
    """
    batches = []
    for i in range(0, len(items), batch_size):
        batches.append(items[i:i + batch_size])
    return batches


class AsyncBatchProcessor:
    """Run a blocking function over items in worker threads, batch by batch."""

    def __init__(self, batch_size: int = 5, max_concurrent: int = 1):
        """
        Initialize batch processor.

        Args:
            batch_size: Items per batch
            max_concurrent: Maximum concurrent batches (the --jobs value)
        """
        self.batch_size = max(1, batch_size)
        self.semaphore = asyncio.Semaphore(max(1, max_concurrent))

    async def process(
        self,
        items: List[Any],
        process_func: Callable[..., Any],
        *args,
        **kwargs
    ) -> List[Any]:
        """
        Process items in batches; results keep the order of `items`.

        Args:
            items: Items to process
            process_func: Blocking function called as process_func(item, *args, **kwargs)
            *args: Additional arguments for process_func
            **kwargs: Additional keyword arguments for process_func

        Returns:
            List of results
        """
        batches = batch_list(items, self.batch_size)
        tasks = []

        for batch in batches:
            task = self._process_batch(batch, process_func, *args, **kwargs)
            tasks.append(task)

        batch_results = await asyncio.gather(*tasks)

        # Flatten results
        results = []
        for batch_result in batch_results:
            results.extend(batch_result)

        return results

    async def _process_batch(
        self,
        batch: List[Any],
        process_func: Callable[..., Any],
        *args,
        **kwargs
    ) -> List[Any]:
        """Process a single batch in one worker thread."""
        async with self.semaphore:
            return await asyncio.to_thread(
                lambda: [process_func(item, *args, **kwargs) for item in batch]
            )


def sample_vectors(
    family: SpaceFamily,
    count: int,
    radius: float,
    rng: np.random.Generator,
    dimension: Optional[int] = None,
    center: int = 0,
    window: int = 6
) -> List[Vector]:
    """
    Draw `count` vectors with entries uniform in [-radius, radius].

    Dense vectors fill every coordinate; sparse vectors fill the indices
    center - window .. center + window.
    """
    if family == SpaceFamily.DENSE:
        values = rng.uniform(-radius, radius, size=(count, dimension))
        return [DenseVector(row) for row in values]

    indices = list(range(center - window, center + window + 1))
    values = rng.uniform(-radius, radius, size=(count, len(indices)))
    samples = [SparseVector(dict(zip(indices, row))) for row in values]
    logger.debug(f"Drew {count} sparse samples on [{indices[0]}, {indices[-1]}]")
    return samples


# Export
__all__ = [
    'Stopwatch',
    'batch_list',
    'AsyncBatchProcessor',
    'sample_vectors'
]
