import time

import numpy as np

from conjulab.model.vectorspace import DenseVector, SpaceFamily, SparseVector
from conjulab.utils.helpers import AsyncBatchProcessor, Stopwatch, batch_list, sample_vectors


class TestBatching:

    def test_batch_list(self):
        assert batch_list([1, 2, 3, 4, 5], 2) == [[1, 2], [3, 4], [5]]
        assert batch_list([], 3) == []

    async def test_processor_keeps_order(self):
        processor = AsyncBatchProcessor(batch_size=3, max_concurrent=4)
        results = await processor.process(list(range(10)), lambda x, k: x * k, 3)
        assert results == [3 * x for x in range(10)]


class TestStopwatch:

    def test_measures_elapsed_time(self):
        with Stopwatch() as sw:
            time.sleep(0.01)
        assert sw.elapsed >= 0.005


class TestSampling:

    def test_dense_samples(self):
        samples = sample_vectors(SpaceFamily.DENSE, 6, 2.0, np.random.default_rng(1), dimension=3)
        assert len(samples) == 6
        assert all(isinstance(x, DenseVector) and x.dimension == 3 for x in samples)
        assert all(x.sup_norm() <= 2.0 for x in samples)

    def test_sparse_samples_stay_in_window(self):
        samples = sample_vectors(SpaceFamily.SPARSE, 4, 1.0, np.random.default_rng(1), center=5, window=2)
        assert all(isinstance(x, SparseVector) for x in samples)
        assert all(x.support() <= frozenset(range(3, 8)) for x in samples)

    def test_same_seed_same_samples(self):
        first = sample_vectors(SpaceFamily.DENSE, 3, 1.0, np.random.default_rng(4), dimension=2)
        second = sample_vectors(SpaceFamily.DENSE, 3, 1.0, np.random.default_rng(4), dimension=2)
        assert first == second
